"""Master/worker evaluation of quadrature points.

Tasks are split into contiguous blocks, one per worker (remainders go to the
lowest-index workers), evaluated concurrently, then sorted by task id and
reduced in fixed index order so the gradient never depends on the schedule.

Two backends:

* ``thread`` (default): in-process pool; each worker evaluates its block with
  ``f.evaluate_batch``.
* ``process``: one worker subprocess per worker speaking
  the line protocol documented in :mod:`dgs_es.worker`.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gradient import (
    DGS, GradientEstimate, assemble, derivatives_from_values, node_offsets,
    node_seeds, quadrature_point,
)
from .objective import EvaluationError
from .quadrature import QuadratureRule
from .worker import RemoteWorker, point_checksum  # noqa: F401 - point_checksum re-exported

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Geometry:
    """Everything a worker needs to rebuild quadrature points from (i, m)."""

    theta: np.ndarray
    frame: np.ndarray
    radii: np.ndarray
    rule: QuadratureRule


@dataclass(frozen=True)
class EvalTask:
    task_id: tuple
    point: np.ndarray = field(repr=False)
    seed: int
    geometry: Geometry | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class EvalResult:
    task_id: tuple
    return_value: float
    wall_time: float  # seconds; the worker's block time divided evenly over its tasks


def plan_tasks(theta, frame, radii, rule: QuadratureRule, base_seed: int,
               iteration: int = 0, crn: bool = False) -> list[EvalTask]:
    """All M*d quadrature-point tasks, row-major in (direction i, node m)."""
    theta = np.asarray(theta, dtype=float)
    frame = np.asarray(frame, dtype=float)
    radii = np.asarray(radii, dtype=float)
    d = len(theta)
    if frame.shape != (d, d) or radii.shape != (d,):
        raise ValueError("theta, frame and radii dimensions disagree")
    geom = Geometry(theta, frame, radii, rule)
    offsets = node_offsets(radii, rule)
    seeds = node_seeds(base_seed, iteration, d, rule.order, crn)
    return [
        EvalTask((i, m), quadrature_point(theta, frame[i], offsets[i, m]), int(seeds[i, m]), geom)
        for i in range(d) for m in range(rule.order)
    ]


def partition(n_tasks: int, workers: int) -> list[range]:
    """Contiguous static blocks; the first ``n_tasks % workers`` blocks get one extra."""
    if workers < 1:
        raise ValueError(f"need at least one worker, got {workers}")
    base, extra = divmod(n_tasks, workers)
    blocks, start = [], 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        blocks.append(range(start, start + size))
        start += size
    return blocks


class Evaluator:
    """Worker pool with L logical workers. Usable as a context manager."""

    def __init__(self, workers: int = 1, backend: str = "thread", python: str | None = None):
        if workers < 1:
            raise ValueError(f"need at least one worker, got {workers}")
        if backend not in ("thread", "process"):
            raise ValueError(f"unknown backend {backend!r}")
        self.workers = workers
        self.backend = backend
        self._python = python
        self._pool = None
        self._procs = None

    # -- lifecycle
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
        if self._procs is not None:
            for proc in self._procs:
                proc.close()
            self._procs = None

    def _thread_pool(self):
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="dgs-worker")
        return self._pool

    def _process_pool(self, f):
        spec = f.describe()
        if spec is None:
            raise ValueError("process backend needs an objective with a describe() recipe")
        if self._procs is None or self._procs[0].objective_spec != spec:
            if self._procs is not None:
                for proc in self._procs:
                    proc.close()
            self._procs = [RemoteWorker(spec, python=self._python) for _ in range(self.workers)]
        return self._procs

    # -- evaluation
    def _run_block(self, worker: int, f, tasks: list[EvalTask]) -> list[EvalResult]:
        if not tasks:
            return []
        t0 = time.perf_counter()
        if self.backend == "process":
            values = self._process_pool(f)[worker].evaluate(tasks)
        else:
            points = np.array([t.point for t in tasks])
            values = np.asarray(f.evaluate_batch(points, [t.seed for t in tasks]), dtype=float)
        if len(values) != len(tasks):
            raise EvaluationError(f"worker {worker} returned {len(values)} values for {len(tasks)} tasks")
        per_task = (time.perf_counter() - t0) / len(tasks)
        return [EvalResult(t.task_id, float(v), per_task) for t, v in zip(tasks, values)]

    def execute(self, tasks: list[EvalTask], f) -> list[EvalResult]:
        """Evaluate every task; results come back sorted by task id."""
        blocks = [[tasks[k] for k in block] for block in partition(len(tasks), self.workers)]
        if self.backend == "process":
            self._process_pool(f)  # start workers before fanning out
        results: list[EvalResult] = []
        failed: list[tuple[int, list[EvalTask], BaseException]] = []
        if self.workers == 1:
            outcomes = []
            for w, block in enumerate(blocks):
                try:
                    outcomes.append(self._run_block(w, f, block))
                except Exception as exc:  # noqa: BLE001 - any worker failure is retried
                    outcomes.append(exc)
        else:
            pool = self._thread_pool()
            futures = [pool.submit(self._run_block, w, f, block) for w, block in enumerate(blocks)]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001
                    outcomes.append(exc)
        for w, out in enumerate(outcomes):
            if isinstance(out, BaseException):
                failed.append((w, blocks[w], out))
            else:
                results.extend(out)
        for w, block, exc in failed:
            # re-queue each task once on the next worker
            retry_worker = (w + 1) % self.workers
            log.warning("worker %d failed (%s); re-queueing %d tasks on worker %d",
                        w, exc, len(block), retry_worker)
            for task in block:
                try:
                    results.extend(self._run_block(retry_worker, f, [task]))
                except Exception as exc2:
                    raise EvaluationError(
                        f"task {task.task_id} failed twice: {exc2}", task_id=task.task_id
                    ) from exc2
        results.sort(key=lambda r: r.task_id)
        return results

    def evaluate_points(self, f, points, seeds) -> np.ndarray:
        """Evaluate explicit points (no quadrature geometry), in input order."""
        tasks = [EvalTask((k,), np.asarray(p, dtype=float), int(s)) for k, (p, s) in enumerate(zip(points, seeds))]
        return np.array([r.return_value for r in self.execute(tasks, f)])


def execute(tasks: list[EvalTask], f, workers: int = 1, backend: str = "thread") -> list[EvalResult]:
    with Evaluator(workers, backend) as ev:
        return ev.execute(tasks, f)


def reduce_to_gradient(results: list[EvalResult], frame, radii, rule: QuadratureRule) -> GradientEstimate:
    """Sort by task id and reduce to the DGS gradient in fixed index order."""
    frame = np.asarray(frame, dtype=float)
    d, order = frame.shape[0], rule.order
    values = np.full((d, order), np.nan)
    seen = np.zeros((d, order), dtype=bool)
    for r in sorted(results, key=lambda r: r.task_id):
        i, m = r.task_id
        if seen[i, m]:
            raise EvaluationError(f"duplicate result for task {r.task_id}", task_id=r.task_id)
        seen[i, m] = True
        values[i, m] = r.return_value
    if not seen.all():
        missing = [tuple(int(x) for x in ij) for ij in np.argwhere(~seen)[:5]]
        raise EvaluationError(f"incomplete evaluation: missing results such as {missing}",
                              task_id=missing[0])
    derivs = derivatives_from_values(values, radii, rule)
    return GradientEstimate(assemble(frame, derivs), derivs, d * order, DGS, values)
