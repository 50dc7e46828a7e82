"""Analytic test objectives with known global maxima."""

from __future__ import annotations

import math

import numpy as np

from .objective import ObjectiveHandle

KINDS = ("sphere", "shifted-quadratic", "multimodal-2d")


def default_shift(d: int) -> np.ndarray:
    return 2.0 * np.cos(np.arange(1, d + 1))


class SyntheticObjective(ObjectiveHandle):
    """Deterministic objective; the evaluation seed is ignored."""

    def __init__(self, kind: str, d: int):
        if kind not in KINDS:
            raise KeyError(f"unknown synthetic objective {kind!r}; valid: {', '.join(KINDS)}")
        if kind == "multimodal-2d":
            d = 2
        if d < 1:
            raise ValueError("dimension must be >= 1")
        self.kind = kind
        self.dimension = d
        self.shift = default_shift(d) if kind == "shifted-quadratic" else np.zeros(d)

    def value_batch(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dimension:
            raise ValueError(f"expected points of dimension {self.dimension}, got {x.shape[1]}")
        if self.kind == "multimodal-2d":
            return multimodal_2d(x)
        diff = x - self.shift
        return -np.sum(diff * diff, axis=1)

    def evaluate(self, theta, seed=0):
        return float(self.value_batch(theta)[0])

    def evaluate_batch(self, points, seeds):
        return self.value_batch(points)

    def gradient(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.kind == "multimodal-2d":
            raise NotImplementedError("no closed-form gradient kept for the multimodal objective")
        return -2.0 * (theta - self.shift)

    @property
    def maximizer(self) -> np.ndarray:
        return self.shift.copy()

    @property
    def max_value(self) -> float:
        return 0.0

    def describe(self):
        return {"kind": "synthetic", "name": self.kind, "dim": self.dimension}

    def initial_params(self, seed: int) -> np.ndarray:
        from .seeding import INIT_STREAM, derive_seed, rng

        gen = rng(derive_seed(seed, INIT_STREAM))
        if self.kind == "multimodal-2d":
            return gen.uniform(-MULTIMODAL_INIT_BOX, MULTIMODAL_INIT_BOX, size=2)
        return gen.normal(0.0, 1.0, size=self.dimension)


MULTIMODAL_INIT_BOX = 3.0


# two ripples on top of the Ackley lattice, both faded out near the origin:
# period 1/7 (amplitude 0.5) and period 1/33 (amplitude 0.2)
RIPPLES = ((0.5, 7.0), (0.2, 33.0))
RIPPLE_WINDOW = 0.3


def _ripple(x, frequency):
    k = 2 * np.pi * frequency
    return 0.5 * (np.cos(k * x[:, 0]) + np.cos(k * x[:, 1])) - 1.0


def multimodal_2d(x) -> np.ndarray:
    """Negated Ackley function plus two finer ripples, on (B, 2) points.

    Four length scales: the Ackley bowl, its unit-period lattice of local
    maxima, a ripple of period 1/7 and a faint ripple of period 1/33. Each
    finer scale traps smoothing radii that are too small to average it out.
    The ripples are non-positive and vanish at the origin, so the global
    maximum stays 0 at the origin.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r2 = x[:, 0] ** 2 + x[:, 1] ** 2
    c = 0.5 * (np.cos(2 * np.pi * x[:, 0]) + np.cos(2 * np.pi * x[:, 1]))
    ackley = 20.0 * np.exp(-0.2 * np.sqrt(0.5 * r2)) + np.exp(c) - 20.0 - math.e
    window = 1.0 - np.exp(-r2 / RIPPLE_WINDOW**2)
    return ackley + window * sum(a * _ripple(x, freq) for a, freq in RIPPLES)


def synthetic_objective(kind: str, d: int = 2) -> SyntheticObjective:
    return SyntheticObjective(kind, d)
