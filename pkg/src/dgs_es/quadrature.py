"""Gauss-Hermite quadrature rules for integrals of the form int g(v) exp(-v^2) dv."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 64
_NEWTON_MAXIT = 100


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (ascending roots of the physicists' Hermite polynomial H_M) and weights."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        # freeze the arrays; rules are shared between threads and workers
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values) -> float:
        """Approximate int g(v) exp(-v^2) dv given g evaluated at the nodes."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def hermite_eval(order: int, v: float) -> tuple[float, float]:
    """Return (H_M(v), H'_M(v)) from the three-term recurrence H_{k+1} = 2v H_k - 2k H_{k-1}."""
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    if order == 0:
        return 1.0, 0.0
    h_prev, h = 1.0, 2.0 * v
    for k in range(1, order):
        h_prev, h = h, 2.0 * v * h - 2.0 * k * h_prev
    # H'_M = 2M H_{M-1}
    return h, 2.0 * order * h_prev


def _initial_guess(order: int, i: int, found: list[float]) -> float:
    # asymptotic starting points for the i-th largest root (Numerical Recipes, gauher)
    if i == 0:
        return math.sqrt(2 * order + 1) - 1.85575 * (2 * order + 1) ** (-1.0 / 6.0)
    z = found[i - 1]
    if i == 1:
        return z - 1.14 * order**0.426 / z
    if i == 2:
        return 1.86 * z - 0.86 * found[0]
    if i == 3:
        return 1.91 * z - 0.91 * found[1]
    return 2.0 * z - found[i - 2]


def _newton_root(order: int, z: float) -> float:
    for _ in range(_NEWTON_MAXIT):
        h, dh = hermite_eval(order, z)
        step = h / dh
        z -= step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            return z
    raise ArithmeticError(f"Newton iteration for H_{order} root did not converge near {z}")


def build_gauss_hermite(order: int) -> QuadratureRule:
    """Build the M-point Gauss-Hermite rule.

    Exact for p(v) exp(-v^2) with deg p <= 2M - 1. Nodes are mirror symmetric by
    construction (only the non-negative roots are computed). Weights use
    w_m = 2^(M+1) M! sqrt(pi) / H'_M(v_m)^2, evaluated in log space.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise ValueError(f"quadrature order must be an integer in [1, {MAX_ORDER}], got {order!r}")
    order = int(order)
    n_pos = order // 2
    positive: list[float] = []
    for i in range(n_pos):
        positive.append(_newton_root(order, _initial_guess(order, i, positive)))
    positive.sort()
    pos = np.array(positive)
    if order % 2:
        nodes = np.concatenate([-pos[::-1], [0.0], pos])
    else:
        nodes = np.concatenate([-pos[::-1], pos])

    log_num = (order + 1) * math.log(2.0) + math.lgamma(order + 1) + 0.5 * math.log(math.pi)
    weights = np.empty(order)
    for j, v in enumerate(nodes):
        _, dh = hermite_eval(order, float(v))
        weights[j] = math.exp(log_num - 2.0 * math.log(abs(dh)))
    # enforce exact mirror symmetry of the weights
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(order=order, nodes=nodes, weights=weights)


def jacobi_gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch nodes/weights from the symmetric tridiagonal Jacobi matrix.

    Independent of :func:`build_gauss_hermite`; used to cross-check it.
    """
    k = np.arange(1, order)
    off = np.sqrt(k / 2.0)
    jac = np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jac)
    weights = math.sqrt(math.pi) * vecs[0, :] ** 2
    return nodes, weights


def hermite_moment(k: int) -> float:
    """int v^k exp(-v^2) dv: zero for odd k, Gamma((k+1)/2) for even k."""
    if k % 2:
        return 0.0
    return math.gamma((k + 1) / 2.0)
