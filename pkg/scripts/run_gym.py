"""Train DGS-ES and vanilla ES on the classic-control tasks and plot both.

Writes ``<out>/<task>/<algorithm>/`` run directories plus a side-by-side
``<out>/<task>/comparison.png``::

    python scripts/run_gym.py --tasks cartpole pendulum --iters 300 --out runs/gym
"""

import argparse
import logging
from pathlib import Path

from dgs_es.harness import ExperimentConfig, plot_band, run_experiment
from dgs_es.optimizer import TrainerConfig

DEFAULT_ITERS = {"cartpole": 150, "mountaincar": 500, "pendulum": 300}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tasks", nargs="+", default=list(DEFAULT_ITERS), choices=list(DEFAULT_ITERS))
    parser.add_argument("--iters", type=int, default=None, help="override the per-task iteration count")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--workers", type=int, default=8)
    parser.add_argument("--out", default="runs/gym")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for task in args.tasks:
        trainer = TrainerConfig(max_iterations=args.iters or DEFAULT_ITERS[task], workers=args.workers)
        tables = {}
        for algo in ("dgs-es", "vanilla-es"):
            cfg = ExperimentConfig(task=task, algorithm=algo, trainer=trainer, seeds=tuple(range(args.seeds)),
                                   out_dir=str(Path(args.out) / task / algo))
            result = run_experiment(cfg)
            tables[algo] = result.aggregate
            final = result.aggregate[-1, 1] if len(result.aggregate) else float("nan")
            print(f"{task:12s} {algo:10s} final mean return {final:9.2f}  status {result.status}")
        plot_band(Path(args.out) / task / "comparison.png", tables, task)


if __name__ == "__main__":
    main()
