"""Gradient estimators: directional Gaussian smoothing (DGS) via Gauss-Hermite
quadrature, and the Monte-Carlo ES baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .directions import check_frame
from .objective import EvaluationError, ObjectiveHandle, as_objective
from .quadrature import QuadratureRule
from .seeding import MC_STREAM, derive_seed

SQRT2 = math.sqrt(2.0)
SQRTPI = math.sqrt(math.pi)

DGS = "DGS"
MC_ES = "MC-ES"


@dataclass
class GradientEstimate:
    gradient: np.ndarray
    directional_derivatives: np.ndarray | None
    evaluations_used: int
    estimator_kind: str
    # DGS: (d, M) objective values at the quadrature points; MC: (samples,)
    point_values: np.ndarray | None = field(default=None, repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.gradient))


def node_offsets(radii, rule: QuadratureRule) -> np.ndarray:
    """(d, M) displacements sqrt(2) sigma_i v_m along each direction."""
    return (SQRT2 * np.asarray(radii, dtype=float))[:, None] * rule.nodes[None, :]


def quadrature_point(theta, xi, offset: float) -> np.ndarray:
    # single source of truth for point construction: workers rebuild points with it
    return theta + offset * xi


def quadrature_points(theta, frame, radii, rule: QuadratureRule) -> np.ndarray:
    """All evaluation points, shape (d, M, len(theta)), row-major in (i, m)."""
    theta = np.asarray(theta, dtype=float)
    frame = np.asarray(frame, dtype=float)
    offsets = node_offsets(radii, rule)
    return theta[None, None, :] + offsets[:, :, None] * frame[:, None, :]


def node_seeds(base_seed: int, iteration: int, d: int, order: int, crn: bool = False) -> np.ndarray:
    """Evaluation seed per (direction, node). In CRN mode every point shares one seed."""
    if crn:
        return np.full((d, order), derive_seed(base_seed, iteration), dtype=np.int64)
    return np.array(
        [[derive_seed(base_seed, iteration, i, m) for m in range(order)] for i in range(d)],
        dtype=np.int64,
    )


def derivatives_from_values(values, radii, rule: QuadratureRule) -> np.ndarray:
    """GH estimate of each smoothed directional derivative from the (d, M) point values.

    The rule is symmetric (v_{M-1-m} = -v_m, equal weights), so the sum is taken
    over mirrored pairs, w_m sqrt(2) v_m (f_m - f_{M-1-m}); the middle node of an
    odd rule has v = 0 and drops out. Constants therefore give exactly zero.
    Pairs are accumulated in fixed order, elementwise across directions, so the
    result does not depend on how many directions are processed together.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    order = rule.order
    coef = rule.weights * SQRT2 * rule.nodes
    acc = np.zeros(values.shape[0])
    for m in range(order - 1, order // 2 - 1 + order % 2, -1):
        acc = acc + (values[:, m] - values[:, order - 1 - m]) * coef[m]
    return acc / (SQRTPI * np.asarray(radii, dtype=float))


def assemble(frame, derivatives) -> np.ndarray:
    """gradient = frame^T @ derivatives."""
    return np.asarray(frame, dtype=float).T @ np.asarray(derivatives, dtype=float)


def dgs_directional_derivative(f, theta, xi, sigma: float, rule: QuadratureRule, seeds):
    """Smoothed derivative of f along unit vector xi at theta.

    Returns ``(derivative, point_values)``.
    """
    f = as_objective(f, len(theta))
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if abs(np.linalg.norm(xi) - 1.0) > 1e-10:
        raise ValueError("direction must have unit 2-norm")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if len(seeds) != rule.order:
        raise ValueError(f"need {rule.order} seeds, got {len(seeds)}")
    offsets = node_offsets([sigma], rule)[0]
    values = np.empty(rule.order)
    for m in range(rule.order):
        try:
            values[m] = f.evaluate(quadrature_point(theta, xi, offsets[m]), int(seeds[m]))
        except EvaluationError:
            raise
        except Exception as exc:
            raise EvaluationError(f"objective failed at node {m}: {exc}", task_id=m) from exc
    return float(derivatives_from_values(values[None, :], [sigma], rule)[0]), values


def _check_inputs(theta, frame, radii):
    theta = np.asarray(theta, dtype=float)
    d = theta.shape[0]
    frame = check_frame(frame, d)
    radii = np.asarray(radii, dtype=float)
    if radii.shape != (d,):
        raise ValueError(f"radii must have shape ({d},), got {radii.shape}")
    if np.any(radii <= 0):
        raise ValueError("smoothing radii must be positive")
    return theta, frame, radii


def dgs_gradient(
    f,
    theta,
    frame,
    radii,
    rule: QuadratureRule,
    base_seed: int = 0,
    iteration: int = 0,
    crn: bool = False,
    evaluator=None,
) -> GradientEstimate:
    """DGS gradient estimate from M*d objective evaluations.

    ``evaluator`` is an optional :class:`~dgs_es.parallel.Evaluator`; without
    one the points are evaluated in-process with ``f.evaluate_batch``.
    """
    theta, frame, radii = _check_inputs(theta, frame, radii)
    f = as_objective(f, len(theta))
    if f.dimension != len(theta):
        raise ValueError(f"objective has dimension {f.dimension}, theta has {len(theta)}")
    d, order = len(theta), rule.order
    if evaluator is not None:
        from .parallel import plan_tasks, reduce_to_gradient

        tasks = plan_tasks(theta, frame, radii, rule, base_seed, iteration=iteration, crn=crn)
        return reduce_to_gradient(evaluator.execute(tasks, f), frame, radii, rule)

    points = quadrature_points(theta, frame, radii, rule).reshape(d * order, d)
    seeds = node_seeds(base_seed, iteration, d, order, crn).ravel()
    values = np.asarray(f.evaluate_batch(points, seeds), dtype=float).reshape(d, order)
    derivs = derivatives_from_values(values, radii, rule)
    return GradientEstimate(assemble(frame, derivs), derivs, d * order, DGS, values)


def es_gradient_mc(
    f, theta, sigma: float, samples: int, rng_seed: int, evaluator=None
) -> GradientEstimate:
    """Monte-Carlo ES gradient (1 / (samples sigma)) sum_m f(theta + sigma u_m) u_m."""
    theta = np.asarray(theta, dtype=float)
    f = as_objective(f, len(theta))
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    gen = np.random.Generator(np.random.PCG64(derive_seed(rng_seed, MC_STREAM)))
    u = gen.standard_normal((samples, len(theta)))
    points = theta[None, :] + sigma * u
    seeds = np.array([derive_seed(rng_seed, MC_STREAM, k) for k in range(samples)], dtype=np.int64)
    if evaluator is not None:
        values = evaluator.evaluate_points(f, points, seeds)
    else:
        values = np.asarray(f.evaluate_batch(points, seeds), dtype=float)
    grad = (u.T @ values) / (samples * sigma)
    return GradientEstimate(grad, None, samples, MC_ES, values)
