"""Blackbox objective handles: J(theta, seed) -> float, with an optional batched path."""

from __future__ import annotations

from typing import Callable

import numpy as np


class EvaluationError(RuntimeError):
    """An objective evaluation failed; ``task_id`` names the offending point."""

    def __init__(self, message: str, task_id=None):
        super().__init__(message)
        self.task_id = task_id


class ObjectiveHandle:
    """Base class for objectives to be maximized.

    Subclasses implement :meth:`evaluate`. :meth:`evaluate_batch` must return
    exactly what a loop over :meth:`evaluate` would, bit for bit; override it
    only with a vectorized path that preserves that. Implementations must be
    safe to call from several threads at once.
    """

    dimension: int

    def evaluate(self, theta: np.ndarray, seed: int) -> float:
        raise NotImplementedError

    def evaluate_batch(self, points: np.ndarray, seeds) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.array([self.evaluate(p, int(s)) for p, s in zip(points, seeds)], dtype=float)

    def describe(self) -> dict | None:
        """JSON-able recipe to rebuild this objective in a worker process (None if not rebuildable)."""
        return None

    def __call__(self, theta, seed: int = 0) -> float:
        return self.evaluate(np.asarray(theta, dtype=float), seed)


class FunctionObjective(ObjectiveHandle):
    """Wrap a plain callable ``fn(theta)`` or ``fn(theta, seed)``."""

    def __init__(self, fn: Callable, dimension: int, uses_seed: bool = False):
        self.fn = fn
        self.dimension = int(dimension)
        self.uses_seed = uses_seed

    def evaluate(self, theta, seed):
        if len(theta) != self.dimension:
            raise ValueError(f"expected parameter vector of length {self.dimension}, got {len(theta)}")
        value = self.fn(theta, seed) if self.uses_seed else self.fn(theta)
        return float(value)


def as_objective(f, dimension: int | None = None) -> ObjectiveHandle:
    if isinstance(f, ObjectiveHandle):
        return f
    if dimension is None:
        raise ValueError("dimension is required to wrap a plain callable")
    return FunctionObjective(f, dimension)
