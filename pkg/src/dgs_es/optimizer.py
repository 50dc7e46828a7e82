"""DGS-ES and vanilla-ES training loops with Adam ascent."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .directions import init_frame, perturb_frame, sample_radii
from .gradient import dgs_gradient, es_gradient_mc
from .objective import EvaluationError, as_objective
from .parallel import Evaluator
from .quadrature import build_gauss_hermite
from .seeding import EVAL_STREAM, FRAME_STREAM, GRADIENT_STREAM, RADII_STREAM, derive_seed

log = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    pass


class TrainingAborted(RuntimeError):
    """Training stopped early; carries the parameters and history reached so far."""

    def __init__(self, message, theta, history):
        super().__init__(message)
        self.theta = theta
        self.history = history


@dataclass
class TrainerConfig:
    quad_order: int = 7
    frame_scale: float = 2.0  # alpha
    radius_mean: float = 1.0  # r
    radius_spread: float = 0.2  # beta
    trigger_tol: float = 0.01
    learning_rate: float = 0.1
    max_iterations: int = 100
    workers: int = 1
    master_seed: int = 0
    crn_mode: bool = False
    eval_episodes: int = 10
    compose_frame: bool = False
    # perturb also after this many iterations without a perturbation (None: off)
    stagnation_trigger: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    backend: str = "thread"

    def __post_init__(self):
        if self.quad_order < 1:
            raise ValueError("quad_order must be >= 1")
        if self.radius_mean - self.radius_spread <= 0 or self.radius_spread < 0:
            raise ValueError("need radius_mean - radius_spread > 0 and radius_spread >= 0")
        if self.trigger_tol <= 0:
            raise ValueError("trigger_tol must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.learning_rate <= 0 or self.frame_scale <= 0:
            raise ValueError("learning_rate and frame_scale must be positive")
        if self.max_iterations < 0 or self.eval_episodes < 0:
            raise ValueError("max_iterations and eval_episodes must be non-negative")


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, d: int, learning_rate=0.1, beta1=0.9, beta2=0.999, epsilon=1e-8):
        return cls(np.zeros(d), np.zeros(d), 0, learning_rate, beta1, beta2, epsilon)


def adam_step(state: AdamState, gradient, theta):
    """One bias-corrected Adam step in the ascent direction. Returns (theta', state')."""
    g = np.asarray(gradient, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if g.shape != theta.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {theta.shape}")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NumericalError(f"non-finite gradient entries at indices {bad[:10].tolist()}")
    b1, b2 = state.beta1, state.beta2
    m = b1 * state.first_moment + (1.0 - b1) * g
    v = b2 * state.second_moment + (1.0 - b2) * (g * g)
    t = state.step_count + 1
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    new_theta = theta + state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_theta, replace(state, first_moment=m, second_moment=v, step_count=t)


@dataclass
class IterationRecord:
    iteration: int
    mean_return: float
    min_return: float
    max_return: float
    grad_norm: float
    evals: int
    perturbed: bool
    wall_ms: float


@dataclass
class TrainingHistory:
    records: list = field(default_factory=list)

    def append(self, record: IterationRecord):
        if self.records and record.iteration != self.records[-1].iteration + 1:
            raise ValueError("history records must be consecutive")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def _eval_returns(f, theta, iteration, config, evaluator):
    if config.eval_episodes == 0:
        return np.array([np.nan])
    seeds = [derive_seed(config.master_seed, EVAL_STREAM, iteration, k) for k in range(config.eval_episodes)]
    points = np.repeat(theta[None, :], config.eval_episodes, axis=0)
    return evaluator.evaluate_points(f, points, seeds)


def _train(f, theta0, config: TrainerConfig, evaluator, estimate, use_frame: bool, callback):
    f = as_objective(f, len(theta0))
    theta = np.array(theta0, dtype=float)
    d = len(theta)
    if f.dimension != d:
        raise ValueError(f"objective dimension {f.dimension} != len(theta0) {d}")
    own_evaluator = evaluator is None
    if own_evaluator:
        evaluator = Evaluator(config.workers, config.backend)
    adam = AdamState.zeros(d, config.learning_rate, config.beta1, config.beta2, config.epsilon)
    history = TrainingHistory()
    frame = init_frame(d)
    radii = np.full(d, float(config.radius_mean))
    last_perturbation = 0
    try:
        for n in range(config.max_iterations):
            t0 = time.perf_counter()
            try:
                returns = _eval_returns(f, theta, n, config, evaluator)
                est = None
                for attempt in range(2):
                    try:
                        est = estimate(f, theta, frame, radii, n, attempt, evaluator)
                        break
                    except EvaluationError as exc:
                        if attempt == 1:
                            raise
                        log.warning("iteration %d: evaluation failed (%s); retrying with fresh seeds", n, exc)
                theta_next, adam = adam_step(adam, est.gradient, theta)
            except (EvaluationError, NumericalError) as exc:
                raise TrainingAborted(f"iteration {n} aborted: {exc}", theta, history) from exc
            perturbed = False
            if use_frame:
                stagnant = (config.stagnation_trigger is not None
                            and n + 1 - last_perturbation >= config.stagnation_trigger)
                if est.norm < config.trigger_tol or stagnant:
                    frame = perturb_frame(frame, config.frame_scale,
                                          derive_seed(config.master_seed, FRAME_STREAM, n),
                                          compose=config.compose_frame)
                    radii = sample_radii(d, config.radius_mean, config.radius_spread,
                                         derive_seed(config.master_seed, RADII_STREAM, n))
                    perturbed = True
                    last_perturbation = n + 1
            theta = theta_next
            record = IterationRecord(
                iteration=n,
                mean_return=float(np.mean(returns)),
                min_return=float(np.min(returns)),
                max_return=float(np.max(returns)),
                grad_norm=est.norm,
                evals=est.evaluations_used,
                perturbed=perturbed,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
            history.append(record)
            if callback is not None:
                callback(record, theta)
    finally:
        if own_evaluator:
            evaluator.close()
    return theta, history


def dgs_es_train(f, theta0, config: TrainerConfig, evaluator=None, callback=None):
    """Maximize f with DGS gradients and Adam. Returns (theta_N, history)."""
    rule = build_gauss_hermite(config.quad_order)
    d = len(theta0)

    def estimate(f, theta, frame, radii, n, attempt, ev):
        base = derive_seed(config.master_seed, GRADIENT_STREAM, attempt)
        est = dgs_gradient(f, theta, frame, radii, rule, base_seed=base, iteration=n,
                           crn=config.crn_mode, evaluator=ev)
        assert est.evaluations_used == rule.order * d
        return est

    return _train(f, theta0, config, evaluator, estimate, True, callback)


def vanilla_es_train(f, theta0, config: TrainerConfig, evaluator=None, callback=None):
    """Monte-Carlo ES baseline at the matched budget of quad_order * d samples per iteration,
    with scalar sigma = radius_mean."""
    samples = config.quad_order * len(theta0)

    def estimate(f, theta, frame, radii, n, attempt, ev):
        seed = derive_seed(config.master_seed, GRADIENT_STREAM, attempt, n)
        return es_gradient_mc(f, theta, config.radius_mean, samples, seed, evaluator=ev)

    return _train(f, theta0, config, evaluator, estimate, False, callback)
