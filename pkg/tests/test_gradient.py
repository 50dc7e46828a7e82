import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgs_es.directions import orthonormalize
from dgs_es.gradient import (
    DGS,
    MC_ES,
    dgs_directional_derivative,
    dgs_gradient,
    es_gradient_mc,
)
from dgs_es.objective import EvaluationError, FunctionObjective
from dgs_es.quadrature import build_gauss_hermite

RULE7 = build_gauss_hermite(7)


def objective(fn, d):
    return FunctionObjective(fn, d)


def random_frame(d, seed):
    return orthonormalize(np.random.default_rng(seed).normal(size=(d, d)))


def trapezoid_smoothed_derivative(g, sigma, n=1_000_001, half_width=12.0):
    """Oracle: (1/sigma) E_{v~N(0,1)}[g(sigma v) v] by the trapezoid rule."""
    v = np.linspace(-half_width, half_width, n)
    integrand = g(sigma * v) * v * np.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)
    return np.trapezoid(integrand, v) / sigma


class TestDirectionalDerivative:
    def test_linear_is_exact(self):
        a = np.array([1.5, -2.0, 0.25])
        xi = np.array([2.0, -1.0, 2.0]) / 3.0
        for sigma in (0.01, 1.0, 7.0):
            d, _ = dgs_directional_derivative(objective(lambda t: a @ t, 3), np.ones(3), xi, sigma, RULE7, [0] * 7)
            assert d == pytest.approx(a @ xi, rel=1e-12)

    def test_even_function_at_origin(self):
        xi = np.array([0.6, 0.8])
        for order in (2, 3, 7):
            rule = build_gauss_hermite(order)
            d, _ = dgs_directional_derivative(objective(lambda t: t @ t, 2), np.zeros(2), xi, 1.3, rule, [0] * order)
            assert abs(d) < 1e-15

    def test_sin_matches_closed_form_and_quadrature_oracle(self):
        oracle = trapezoid_smoothed_derivative(np.sin, 1.0)
        assert oracle == pytest.approx(math.exp(-0.5), abs=1e-9)
        d, values = dgs_directional_derivative(
            objective(lambda t: math.sin(t[0]), 2), np.zeros(2), np.array([1.0, 0.0]), 1.0, RULE7, [0] * 7
        )
        assert d == pytest.approx(0.6065306597, abs=1e-6)
        assert d == pytest.approx(oracle, abs=1e-6)
        assert values.shape == (7,)

    def test_point_values_are_objective_at_nodes(self):
        theta = np.array([0.3, -0.2])
        xi = np.array([0.0, 1.0])
        _, values = dgs_directional_derivative(
            objective(lambda t: t[1], 2), theta, xi, 0.5, RULE7, list(range(7))
        )
        np.testing.assert_allclose(values, theta[1] + math.sqrt(2) * 0.5 * RULE7.nodes, atol=1e-15)

    def test_rejects_non_unit_direction(self):
        with pytest.raises(ValueError):
            dgs_directional_derivative(objective(lambda t: 0.0, 2), np.zeros(2), np.array([1.0, 1.0]), 1.0, RULE7, [0] * 7)

    def test_rejects_wrong_seed_count(self):
        with pytest.raises(ValueError):
            dgs_directional_derivative(objective(lambda t: 0.0, 1), np.zeros(1), np.ones(1), 1.0, RULE7, [0] * 3)

    def test_failure_carries_node_index(self):
        calls = []

        def flaky(t):
            calls.append(1)
            if len(calls) == 4:
                raise RuntimeError("simulator crashed")
            return 0.0

        with pytest.raises(EvaluationError) as info:
            dgs_directional_derivative(objective(flaky, 1), np.zeros(1), np.ones(1), 1.0, RULE7, [0] * 7)
        assert info.value.task_id == 3


class TestDgsGradient:
    def test_linear_identity_frame(self):
        a = np.array([1.0, -3.0, 0.5, 2.0])
        est = dgs_gradient(objective(lambda t: a @ t, 4), np.zeros(4), np.eye(4), [0.3, 1, 2, 5], RULE7)
        np.testing.assert_allclose(est.gradient, a, rtol=1e-12)
        assert est.estimator_kind == DGS
        assert est.evaluations_used == 28
        assert est.point_values.shape == (4, 7)

    def test_rotated_frame_recovers_gradient(self):
        frame = np.array([[0.0, 1.0], [-1.0, 0.0]])
        est = dgs_gradient(objective(lambda t: t[0], 2), np.zeros(2), frame, [1.0, 1.0], RULE7)
        np.testing.assert_allclose(est.directional_derivatives, [0.0, -1.0], atol=1e-15)
        np.testing.assert_allclose(est.gradient, [1.0, 0.0], atol=1e-15)

    def test_half_sphere(self):
        for order in (2, 3, 7):
            est = dgs_gradient(objective(lambda t: 0.5 * t @ t, 2), np.array([1.0, 2.0]), np.eye(2),
                               [1.0, 1.0], build_gauss_hermite(order))
            np.testing.assert_allclose(est.gradient, [1.0, 2.0], rtol=1e-12)

    def test_reconstructible_from_directional_derivatives(self):
        frame = random_frame(5, 1)
        est = dgs_gradient(objective(lambda t: np.sum(np.sin(t)), 5), np.arange(5.0), frame, np.full(5, 0.7), RULE7)
        np.testing.assert_allclose(est.gradient, frame.T @ est.directional_derivatives, rtol=0, atol=0)

    def test_evaluation_points(self):
        seen = []

        def record(t):
            seen.append(t.copy())
            return 0.0

        theta = np.array([1.0, -1.0])
        frame = random_frame(2, 3)
        radii = np.array([0.5, 2.0])
        dgs_gradient(objective(record, 2), theta, frame, radii, build_gauss_hermite(3))
        expected = [theta + math.sqrt(2) * radii[i] * v * frame[i]
                    for i in range(2) for v in build_gauss_hermite(3).nodes]
        np.testing.assert_allclose(np.array(seen), np.array(expected), atol=1e-15)

    @pytest.mark.parametrize("bad", ["frame", "radii", "nonorth", "negative"])
    def test_dimension_checks(self, bad):
        frame, radii = np.eye(3), np.ones(3)
        if bad == "frame":
            frame = np.eye(2)
        elif bad == "radii":
            radii = np.ones(2)
        elif bad == "nonorth":
            frame = frame + 0.1
        else:
            radii = -radii
        with pytest.raises(ValueError):
            dgs_gradient(objective(lambda t: 0.0, 3), np.zeros(3), frame, radii, RULE7)

    def test_deterministic(self):
        f = FunctionObjective(lambda t, s: np.sum(np.cos(t)) + 1e-3 * (s % 97), 6, uses_seed=True)
        args = (np.linspace(-1, 1, 6), random_frame(6, 2), np.full(6, 0.9), RULE7, 1234)
        a, b = dgs_gradient(f, *args, iteration=5), dgs_gradient(f, *args, iteration=5)
        assert a.gradient.tobytes() == b.gradient.tobytes()
        assert a.point_values.tobytes() == b.point_values.tobytes()

    def test_crn_shares_one_seed(self):
        seeds = []
        f = FunctionObjective(lambda t, s: seeds.append(s) or 0.0, 3, uses_seed=True)
        dgs_gradient(f, np.zeros(3), np.eye(3), np.ones(3), RULE7, base_seed=9, crn=True)
        assert len(set(seeds)) == 1
        seeds.clear()
        dgs_gradient(f, np.zeros(3), np.eye(3), np.ones(3), RULE7, base_seed=9)
        assert len(set(seeds)) == 21


class TestProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.005, 0.05, 0.5, 1.0, 2.0]), st.integers(2, 9))
    def test_quadratic_exact_for_any_sigma(self, seed, sigma, order):
        gen = np.random.default_rng(seed)
        d = 6
        a = gen.normal(size=(d, d))
        q = a @ a.T
        b = gen.normal(size=d)
        f = objective(lambda t: -0.5 * t @ q @ t + b @ t, d)
        theta = gen.normal(size=d)
        frame = random_frame(d, seed)
        est = dgs_gradient(f, theta, frame, np.full(d, sigma), build_gauss_hermite(order))
        np.testing.assert_allclose(est.gradient, -q @ theta + b, atol=1e-10 * max(1.0, np.abs(q).max()))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 12))
    def test_linear_frame_invariance(self, seed, d):
        gen = np.random.default_rng(seed)
        a = gen.normal(size=d)
        est = dgs_gradient(objective(lambda t: a @ t, d), gen.normal(size=d), random_frame(d, seed),
                           gen.uniform(0.1, 3.0, size=d), RULE7)
        np.testing.assert_allclose(est.gradient, a, atol=1e-10)

    def test_sigma_consistency_rate(self):
        gen = np.random.default_rng(7)
        theta = gen.uniform(-2, 2, size=5)
        f = objective(lambda t: np.sum(np.sin(t)), 5)
        sigmas = np.array([0.4, 0.2, 0.1, 0.05])
        errors = [np.linalg.norm(dgs_gradient(f, theta, np.eye(5), np.full(5, s), RULE7).gradient - np.cos(theta))
                  for s in sigmas]
        slope = np.polyfit(np.log(sigmas), np.log(errors), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)

    def test_spectral_decay_in_order_at_moderate_sigma(self):
        sigma = 0.5
        exact = math.exp(-sigma**2 / 2)
        errors = []
        for order in range(1, 9):
            d, _ = dgs_directional_derivative(objective(lambda t: math.sin(t[0]), 1), np.zeros(1), np.ones(1),
                                              sigma, build_gauss_hermite(order), [0] * order)
            errors.append(abs(d - exact))
        assert all(b < a for a, b in zip(errors[:6], errors[1:6]))
        assert errors[7] < 1e-8


class TestMonteCarlo:
    def test_zero_objective(self):
        est = es_gradient_mc(objective(lambda t: 0.0, 4), np.ones(4), 0.1, 50, 3)
        assert np.all(est.gradient == 0.0)
        assert est.estimator_kind == MC_ES
        assert est.evaluations_used == 50

    def test_constant_objective_shrinks(self):
        c, sigma = 3.0, 0.5
        f = objective(lambda t: c, 3)
        norms = [es_gradient_mc(f, np.zeros(3), sigma, n, 11).norm for n in (100, 10_000)]
        assert norms[1] < norms[0]
        # E||sum u|| ~ sqrt(n d) so the norm is about c sqrt(d) / (sigma sqrt(n))
        assert norms[1] < 5 * c * math.sqrt(3) / (sigma * math.sqrt(10_000))

    def test_linear_within_three_standard_errors(self):
        d, sigma, n = 5, 0.1, 100_000
        a = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
        f = objective(lambda t: a @ t, d)
        est = es_gradient_mc(f, np.zeros(d), sigma, n, 5)
        # standard error from the sample variance of the per-sample terms f(theta + sigma u) u / sigma
        terms_var = np.var(_mc_terms(f, d, sigma, n, 5), axis=0, ddof=1)
        stderr = np.sqrt(terms_var / n)
        assert np.all(np.abs(est.gradient - a) < 3 * stderr)

    def test_deterministic(self):
        f = objective(lambda t: np.sum(t**2), 3)
        a = es_gradient_mc(f, np.ones(3), 0.2, 30, 42)
        b = es_gradient_mc(f, np.ones(3), 0.2, 30, 42)
        assert a.gradient.tobytes() == b.gradient.tobytes()


def _mc_terms(f, d, sigma, n, seed):
    from dgs_es.seeding import MC_STREAM, derive_seed

    gen = np.random.Generator(np.random.PCG64(derive_seed(seed, MC_STREAM)))
    u = gen.standard_normal((n, d))
    values = f.evaluate_batch(sigma * u, np.zeros(n, dtype=int))
    return values[:, None] * u / sigma
