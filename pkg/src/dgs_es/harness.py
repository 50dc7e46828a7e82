"""Multi-seed experiment runner: CSV histories, aggregate curves and plots.

Layout of an output directory::

    seed_<s>.csv        one row per iteration (see HISTORY_COLUMNS)
    aggregate.csv       per-iteration mean/min/max of mean_return across seeds
    curve.png           mean curve with a min-max band
    error.log           only when a run failed

A sigma sweep writes ``sweep_r<r>_seed<s>.csv`` per run, ``sweep.csv`` with the
final returns and the checksum of the shared initial parameters, and
``sweep.png`` overlaying the per-radius mean curves.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
import traceback
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .envs import ENV_KEYS, RolloutObjective, make_env
from .optimizer import TrainerConfig, TrainingAborted, dgs_es_train, vanilla_es_train
from .synthetic import KINDS, synthetic_objective

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("iteration", "mean_return", "min_return", "max_return",
                   "grad_norm", "evals", "perturbed", "wall_ms")
AGGREGATE_COLUMNS = ("iteration", "mean", "min", "max")
ALGORITHMS = {"dgs-es": dgs_es_train, "vanilla-es": vanilla_es_train}
CONFIG_VERSION = 1
SYNTHETIC_DEFAULT_DIM = 10


def valid_tasks() -> list[str]:
    return list(ENV_KEYS) + list(KINDS)


def make_task(task: str):
    """Objective for a task name. Synthetic kinds take an optional ``:dim`` suffix."""
    name, _, dim = task.partition(":")
    if name in KINDS:
        return synthetic_objective(name, int(dim) if dim else SYNTHETIC_DEFAULT_DIM)
    try:
        make_env(task)
    except KeyError:
        pass
    else:
        return RolloutObjective(task)
    raise KeyError(f"unknown task {task!r}; valid tasks: {', '.join(valid_tasks())}")


@dataclass
class ExperimentConfig:
    task: str = "cartpole"
    algorithm: str = "dgs-es"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    seeds: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "runs"
    sweep: tuple | None = None
    concurrent_seeds: bool = False

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be distinct, got {self.seeds}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; valid: {', '.join(ALGORITHMS)}")
        make_task(self.task)  # raises KeyError on unknown tasks
        if self.sweep is not None:
            self.sweep = tuple(float(r) for r in self.sweep)
            if not self.sweep:
                raise ValueError("sweep needs at least one radius")
            ratio = self.trainer.radius_spread / self.trainer.radius_mean
            for r in self.sweep:
                if r <= 0 or r - ratio * r <= 0:
                    raise ValueError(f"sweep radius {r} must exceed its spread")


# -- CSV and plots

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(HISTORY_COLUMNS)
        for rec in history:
            out.writerow([_fmt(getattr(rec, c)) for c in HISTORY_COLUMNS])


def read_history(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in HISTORY_COLUMNS}


def aggregate(curves: list[np.ndarray]) -> np.ndarray:
    """(n_iterations, 4) array of iteration, mean, min, max across seeds.

    Runs that stopped early contribute to the iterations they completed.
    """
    n = max(len(c) for c in curves)
    rows = []
    for k in range(n):
        vals = np.array([c[k] for c in curves if len(c) > k])
        rows.append((k, float(np.mean(vals)), float(np.min(vals)), float(np.max(vals))))
    return np.array(rows, dtype=float).reshape(-1, 4)


def write_aggregate(path, table) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(AGGREGATE_COLUMNS)
        for row in table:
            out.writerow([str(int(row[0]))] + [_fmt(v) for v in row[1:]])


def plot_band(path, curves: dict[str, np.ndarray], title: str) -> None:
    """Mean curve with min-max shading, one line per label."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, table in curves.items():
        if len(table) == 0:
            continue
        ax.plot(table[:, 0], table[:, 1], label=label)
        ax.fill_between(table[:, 0], table[:, 2], table[:, 3], alpha=0.25)
    ax.set_xlabel("iteration")
    ax.set_ylabel("average return")
    ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


# -- runs

def theta_checksum(theta) -> int:
    return zlib.crc32(np.ascontiguousarray(theta, dtype="<f8").tobytes())


def _train_one(task, algorithm, trainer: TrainerConfig, seed: int, theta0=None):
    f = make_task(task)
    if theta0 is None:
        theta0 = f.initial_params(seed)
    train = ALGORITHMS[algorithm]
    try:
        theta, history = train(f, theta0, replace(trainer, master_seed=seed))
        return theta, history, None
    except TrainingAborted as exc:
        return exc.theta, exc.history, exc


def _map_seeds(fn, seeds, concurrent: bool):
    if concurrent and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=len(seeds)) as pool:
            return list(pool.map(fn, seeds))
    return [fn(s) for s in seeds]


def _write_error_log(out: Path, failures) -> None:
    with open(out / "error.log", "w") as fh:
        for label, exc in failures:
            fh.write(f"{label}: {exc}\n")
            fh.write("".join(traceback.format_exception(type(exc), exc, exc.__traceback__)))
            fh.write("\n")


@dataclass
class ExperimentResult:
    status: int
    histories: dict
    aggregate: np.ndarray
    out_dir: Path


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Train every seed and write per-seed CSVs, the aggregate CSV and the plot.

    A failed seed keeps its partial history; the status is then 1 and the
    failure is written to ``error.log``.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(seed):
        try:
            return _train_one(config.task, config.algorithm, config.trainer, seed)
        except Exception as exc:  # noqa: BLE001 - recorded in error.log
            return None, None, exc

    outcomes = _map_seeds(one, config.seeds, config.concurrent_seeds)
    histories, failures = {}, []
    for seed, (_, history, exc) in zip(config.seeds, outcomes):
        if history is not None:
            histories[seed] = history
            write_history(out / f"seed_{seed}.csv", history)
        if exc is not None:
            failures.append((f"seed {seed}", exc))
            log.error("seed %d failed: %s", seed, exc)
    curves = [h.column("mean_return") for h in histories.values() if len(h)]
    table = aggregate(curves) if curves else np.zeros((0, 4))
    write_aggregate(out / "aggregate.csv", table)
    plot_band(out / "curve.png", {config.algorithm: table}, f"{config.task} ({config.algorithm})")
    if failures:
        _write_error_log(out, failures)
    return ExperimentResult(1 if failures else 0, histories, table, out)


@dataclass
class SweepResult:
    status: int
    final_returns: dict  # (seed, r) -> return at the last iteration
    theta0_checksums: dict  # (seed, r) -> crc32 of the initial parameters
    out_dir: Path


def _r_label(r: float) -> str:
    return repr(float(r))


def run_sigma_sweep(config: ExperimentConfig, r_values=None) -> SweepResult:
    """One training per radius from a shared initialization per seed.

    The spread is rescaled with the radius, keeping the configured ratio
    ``radius_spread / radius_mean`` (0.2 by default).
    """
    r_values = tuple(r_values if r_values is not None else config.sweep)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ratio = config.trainer.radius_spread / config.trainer.radius_mean
    finals, checks, failures, curves = {}, {}, [], {r: [] for r in r_values}

    def one(seed):
        theta0 = make_task(config.task).initial_params(seed)
        runs = []
        for r in r_values:
            trainer = replace(config.trainer, radius_mean=r, radius_spread=ratio * r)
            try:
                _, history, exc = _train_one(config.task, config.algorithm, trainer, seed, theta0.copy())
            except Exception as exc2:  # noqa: BLE001
                history, exc = None, exc2
            runs.append((r, history, exc, theta_checksum(theta0)))
        return runs

    per_seed = _map_seeds(one, config.seeds, config.concurrent_seeds)
    for seed, runs in zip(config.seeds, per_seed):
        for r, history, exc, crc in runs:
            checks[(seed, r)] = crc
            if history is not None:
                write_history(out / f"sweep_r{_r_label(r)}_seed{seed}.csv", history)
                if len(history):
                    finals[(seed, r)] = history.records[-1].mean_return
                    curves[r].append(history.column("mean_return"))
            if exc is not None:
                failures.append((f"seed {seed} r={r}", exc))
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed", "radius", "final_return", "theta0_crc32"))
        for (seed, r), crc in checks.items():
            w.writerow((seed, _fmt(r), _fmt(finals.get((seed, r), float("nan"))), crc))
    plot_band(out / "sweep.png", {f"r={r:g}": aggregate(c) for r, c in curves.items() if c},
              f"{config.task}: radius sweep")
    if failures:
        _write_error_log(out, failures)
    return SweepResult(1 if failures else 0, finals, checks, out)


# -- command line

_FLAG_FIELDS = {
    "order": ("quad_order", int),
    "radius": ("radius_mean", float),
    "spread": ("radius_spread", float),
    "alpha": ("frame_scale", float),
    "trigger_tol": ("trigger_tol", float),
    "lr": ("learning_rate", float),
    "iters": ("max_iterations", int),
    "workers": ("workers", int),
    "eval_episodes": ("eval_episodes", int),
    "backend": ("backend", str),
}


def parse_seeds(text: str) -> tuple:
    """``"5"`` means seeds 0..4; ``"3,7,11"`` lists seeds explicitly."""
    text = text.strip()
    if "," in text:
        return tuple(int(s) for s in text.split(",") if s.strip())
    n = int(text)
    if n < 1:
        raise ValueError("need at least one seed")
    return tuple(range(n))


def parse_sweep(text: str) -> tuple:
    return tuple(float(r) for r in text.split(",") if r.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dgs-es", description="Run DGS-ES / vanilla ES experiments.")
    p.add_argument("--config", help="INI file with an [experiment] section mirroring these flags")
    p.add_argument("--task", help=f"one of: {', '.join(valid_tasks())} (synthetic kinds accept :dim)")
    p.add_argument("--algo", choices=sorted(ALGORITHMS))
    p.add_argument("--order", type=int, help="Gauss-Hermite order M")
    p.add_argument("--radius", type=float, help="mean smoothing radius r")
    p.add_argument("--spread", type=float, help="radius spread beta")
    p.add_argument("--alpha", type=float, help="frame perturbation scale")
    p.add_argument("--trigger-tol", type=float, help="gradient-norm tolerance for perturbation")
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--iters", type=int, help="number of iterations")
    p.add_argument("--workers", type=int, help="evaluation workers per run")
    p.add_argument("--backend", choices=("thread", "process"))
    p.add_argument("--eval-episodes", type=int, help="reporting rollouts per iteration")
    p.add_argument("--seeds", help="seed count or comma-separated list (default 5)")
    p.add_argument("--crn", action="store_true", default=None, help="common random numbers")
    p.add_argument("--concurrent-seeds", action="store_true", default=None)
    p.add_argument("--out", help="output directory")
    p.add_argument("--sweep", help="comma-separated radii for a sigma sweep")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config_file(path) -> dict:
    """Read an INI file. Keys use the flag names with dashes or underscores."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ValueError(f"cannot read config file {path}")
    if not cp.has_section("experiment"):
        raise ValueError(f"{path}: missing [experiment] section")
    section = dict(cp["experiment"])
    version = section.pop("version", None)
    if version is None or int(version) != CONFIG_VERSION:
        raise ValueError(f"{path}: unsupported config version {version!r} (expected {CONFIG_VERSION})")
    return {k.replace("-", "_"): v for k, v in section.items()}


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    known = set(_FLAG_FIELDS) | {"task", "algo", "seeds", "crn", "concurrent_seeds", "out", "sweep"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in known:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    trainer_kw = {}
    for key, (name, cast) in _FLAG_FIELDS.items():
        if key in values:
            trainer_kw[name] = cast(values[key])
    if "crn" in values:
        trainer_kw["crn_mode"] = _bool(values["crn"])
    trainer = TrainerConfig(**trainer_kw)
    seeds = values.get("seeds", "5")
    sweep = values.get("sweep")
    return ExperimentConfig(
        task=values.get("task", "cartpole"),
        algorithm=values.get("algo", "dgs-es"),
        trainer=trainer,
        seeds=parse_seeds(seeds) if isinstance(seeds, str) else tuple(seeds),
        out_dir=values.get("out", "runs"),
        sweep=parse_sweep(sweep) if isinstance(sweep, str) else sweep,
        concurrent_seeds=_bool(values.get("concurrent_seeds", False)),
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except KeyError as exc:
        parser.print_usage(sys.stderr)
        print(f"dgs-es: error: {exc.args[0]}", file=sys.stderr)
        return 2
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"dgs-es: error: {exc}", file=sys.stderr)
        return 2
    try:
        if config.sweep is not None and len(config.sweep) > 1:
            result = run_sigma_sweep(config)
        else:
            if config.sweep:
                r = config.sweep[0]
                ratio = config.trainer.radius_spread / config.trainer.radius_mean
                config.trainer = replace(config.trainer, radius_mean=r, radius_spread=ratio * r)
            result = run_experiment(config)
    except Exception as exc:  # noqa: BLE001 - last-resort failure report
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_error_log(out, [("run", exc)])
        print(f"dgs-es: run failed: {exc} (see {out / 'error.log'})", file=sys.stderr)
        return 1
    if result.status:
        print(f"dgs-es: some runs failed; see {result.out_dir / 'error.log'}", file=sys.stderr)
    return result.status
