"""Smoothing-radius sweep on the 2-d multimodal objective.

Every radius starts from the same per-seed initial point, so differences in
the final return come from the radius alone::

    python scripts/sigma_sweep.py --radii 0.5 0.05 0.005 --out runs/sweep
"""

import argparse
import logging

from dgs_es.harness import ExperimentConfig, run_sigma_sweep
from dgs_es.optimizer import TrainerConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--task", default="multimodal-2d")
    parser.add_argument("--radii", type=float, nargs="+", default=[0.5, 0.05, 0.005])
    parser.add_argument("--iters", type=int, default=500)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--out", default="runs/sweep")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = ExperimentConfig(task=args.task, trainer=TrainerConfig(max_iterations=args.iters, eval_episodes=1),
                           seeds=tuple(range(args.seeds)), out_dir=args.out, sweep=tuple(args.radii))
    result = run_sigma_sweep(cfg)
    print("seed  " + "  ".join(f"r={r:<8g}" for r in cfg.sweep))
    for seed in cfg.seeds:
        print(f"{seed:<5d} " + "  ".join(f"{result.final_returns[(seed, r)]:10.4f}" for r in cfg.sweep))
    return result.status


if __name__ == "__main__":
    raise SystemExit(main())
