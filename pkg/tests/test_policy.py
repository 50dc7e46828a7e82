import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf, tanh

from dgs_es.policy import ActionSpec, MlpPolicy, load_params, param_count, save_params

CARTPOLE = MlpPolicy(4, ActionSpec.discrete(2))
PENDULUM = MlpPolicy(3, ActionSpec.continuous([-2.0], [2.0]))


class TestParamCount:
    def test_cartpole(self):
        assert param_count(CARTPOLE) == 114

    def test_pendulum(self):
        assert param_count(PENDULUM) == 81

    def test_tiny(self):
        assert param_count(MlpPolicy(1, ActionSpec.continuous([-1.0], [1.0]), hidden_dim=1)) == 4


class TestActionSpec:
    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            ActionSpec.continuous([1.0], [1.0])
        with pytest.raises(ValueError):
            ActionSpec.continuous([0.0, 0.0], [1.0])

    def test_bad_discrete(self):
        with pytest.raises(ValueError):
            ActionSpec.discrete(0)


class TestAct:
    def test_zero_params_discrete_ties_to_first(self):
        assert CARTPOLE.act(np.zeros(114), np.array([0.1, -2.0, 0.3, 1.0])) == 0

    def test_zero_params_continuous_midpoint(self):
        assert PENDULUM.act(np.zeros(81), np.array([1.0, 0.0, 0.5]))[0] == 0.0

    def test_hand_built_network(self):
        # one hidden unit: out = w2 * tanh(w1 * obs + b1) + b2, squashed onto [-1, 3]
        policy = MlpPolicy(1, ActionSpec.continuous([-1.0], [3.0]), hidden_dim=1)
        w1, b1, w2, b2 = 0.7, -0.2, 1.3, 0.05
        theta = np.array([w1, b1, w2, b2])
        mp.dps = 40
        out = mpf(w2) * tanh(mpf(w1) * mpf("0.5") + mpf(b1)) + mpf(b2)
        expected = -1 + (tanh(out) + 1) / 2 * 4
        assert policy.forward(theta[None, :], np.array([[0.5]]))[0, 0] == pytest.approx(float(out), abs=1e-12)
        assert policy.act(theta, np.array([0.5]))[0] == pytest.approx(float(expected), abs=1e-12)

    def test_layout_weights_then_bias(self):
        policy = MlpPolicy(2, ActionSpec.discrete(3), hidden_dim=4)
        theta = np.arange(policy.param_count, dtype=float)
        w1, b1, w2, b2 = policy.unflatten(theta)
        assert w1[0].tolist() == [0.0, 1.0] and w1[1].tolist() == [2.0, 3.0]
        assert b1.tolist() == [8.0, 9.0, 10.0, 11.0]
        assert w2.shape == (3, 4) and w2[0, 0] == 12.0
        assert b2.tolist() == [24.0, 25.0, 26.0]

    def test_dimension_errors(self):
        with pytest.raises(ValueError):
            CARTPOLE.act(np.zeros(114), np.zeros(3))
        with pytest.raises(ValueError):
            CARTPOLE.act(np.zeros(113), np.zeros(4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.lists(st.floats(-50, 50), min_size=3, max_size=3))
    def test_continuous_in_bounds(self, seed, obs):
        theta = np.random.default_rng(seed).normal(0, 5, size=81)
        a = PENDULUM.act(theta, np.array(obs))
        assert -2.0 <= a[0] <= 2.0

    def test_deterministic_and_batch_consistent(self):
        gen = np.random.default_rng(0)
        thetas = gen.normal(size=(7, 114))
        obs = gen.normal(size=(7, 4))
        batch = CARTPOLE.forward(thetas, obs)
        for k in range(7):
            single = CARTPOLE.forward(thetas[k:k + 1], obs[k:k + 1])[0]
            assert single.tobytes() == batch[k].tobytes()


@settings(max_examples=30)
@given(st.integers(0, 2**31))
def test_flatten_round_trip(seed):
    theta = np.random.default_rng(seed).normal(size=CARTPOLE.param_count)
    assert np.array_equal(CARTPOLE.flatten(*CARTPOLE.unflatten(theta)), theta)


class TestInit:
    def test_same_seed(self):
        assert np.array_equal(CARTPOLE.init_params(3), CARTPOLE.init_params(3))

    def test_different_seeds(self):
        assert not np.array_equal(CARTPOLE.init_params(3), CARTPOLE.init_params(4))

    def test_layer_scales(self):
        policy = MlpPolicy(25, ActionSpec.discrete(16), hidden_dim=400)
        theta = policy.init_params(0)
        w1, b1, w2, b2 = policy.unflatten(theta)
        layer1 = np.concatenate([w1.ravel(), b1])
        layer2 = np.concatenate([w2.ravel(), b2])
        assert len(layer1) >= 10_000 and len(layer2) >= 6_000
        assert np.std(layer1) == pytest.approx(1 / math.sqrt(25), rel=0.05)
        assert np.std(layer2) == pytest.approx(1 / math.sqrt(400), rel=0.05)


def test_checkpoint_round_trip(tmp_path):
    theta = PENDULUM.init_params(1)
    path = tmp_path / "theta.bin"
    save_params(path, PENDULUM, theta)
    header, back = load_params(path)
    assert header["count"] == 81 and header["obs_dim"] == 3
    assert back.tobytes() == theta.tobytes()
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_params(path)
