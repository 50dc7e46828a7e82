"""Classic-control tasks (CartPole-v0, MountainCarContinuous-v0, Pendulum-v0)
re-implemented as vectorized numpy dynamics, plus rollout-based objectives.

Dynamics, constants and rewards follow the gym 0.17 reference code, including
its expression ordering so trajectories agree to rounding. Initial states are
drawn from each task's reference distribution with a Philox generator keyed by
the episode seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .objective import ObjectiveHandle
from .policy import ActionSpec, MlpPolicy
from .seeding import rng


class ContractViolation(RuntimeError):
    """Raised when stepping an environment whose episode is already over."""


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    state_dim: int
    action_spec: ActionSpec
    max_steps: int
    constants: MappingProxyType = field(repr=False)


@dataclass(frozen=True)
class EnvState:
    values: np.ndarray
    steps: int = 0
    done: bool = False


@dataclass(frozen=True)
class EpisodeResult:
    total_return: float
    steps: int
    terminated_early: bool


def _spec(name, obs_dim, state_dim, action_spec, max_steps, **constants):
    return EnvSpec(name, obs_dim, state_dim, action_spec, max_steps, MappingProxyType(constants))


CARTPOLE = _spec(
    "CartPole-v0", 4, 4, ActionSpec.discrete(2), 200,
    gravity=9.8, masscart=1.0, masspole=0.1, length=0.5, force_mag=10.0, tau=0.02,
    theta_threshold_radians=12 * 2 * math.pi / 360, x_threshold=2.4,
)
MOUNTAIN_CAR = _spec(
    "MountainCarContinuous-v0", 2, 2, ActionSpec.continuous([-1.0], [1.0]), 999,
    min_position=-1.2, max_position=0.6, max_speed=0.07, goal_position=0.45,
    goal_velocity=0.0, power=0.0015,
)
PENDULUM = _spec(
    "Pendulum-v0", 3, 2, ActionSpec.continuous([-2.0], [2.0]), 200,
    max_speed=8.0, max_torque=2.0, dt=0.05, g=10.0, m=1.0, l=1.0,
)

ENVIRONMENTS = {"cartpole": CARTPOLE, "mountaincar": MOUNTAIN_CAR, "pendulum": PENDULUM}
ENV_KEYS = tuple(ENVIRONMENTS)
_ALIASES = {spec.name.lower(): key for key, spec in ENVIRONMENTS.items()}


def make_env(name: str) -> EnvSpec:
    key = name.lower()
    key = _ALIASES.get(key, key)
    if key not in ENVIRONMENTS:
        raise KeyError(f"unknown environment {name!r}; valid: {', '.join(ENVIRONMENTS)}")
    return ENVIRONMENTS[key]


# --- batched dynamics -------------------------------------------------------
# each takes states (B, state_dim) and actions, returns (new_states, rewards, terminal)

def _cartpole_dynamics(c, s, a):
    x, x_dot, theta, theta_dot = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
    total_mass = c["masspole"] + c["masscart"]
    polemass_length = c["masspole"] * c["length"]
    force = np.where(np.asarray(a) == 1, c["force_mag"], -c["force_mag"])
    costheta = np.cos(theta)
    sintheta = np.sin(theta)
    temp = (force + polemass_length * theta_dot**2 * sintheta) / total_mass
    thetaacc = (c["gravity"] * sintheta - costheta * temp) / (
        c["length"] * (4.0 / 3.0 - c["masspole"] * costheta**2 / total_mass)
    )
    xacc = temp - polemass_length * thetaacc * costheta / total_mass
    tau = c["tau"]
    new = np.stack([x + tau * x_dot, x_dot + tau * xacc,
                    theta + tau * theta_dot, theta_dot + tau * thetaacc], axis=1)
    terminal = ((new[:, 0] < -c["x_threshold"]) | (new[:, 0] > c["x_threshold"])
                | (new[:, 2] < -c["theta_threshold_radians"])
                | (new[:, 2] > c["theta_threshold_radians"]))
    return new, np.ones(len(s)), terminal


def _mountain_car_dynamics(c, s, a):
    u = np.asarray(a, dtype=float).reshape(len(s), -1)[:, 0]
    position, velocity = s[:, 0], s[:, 1]
    force = np.minimum(np.maximum(u, -1.0), 1.0)
    velocity = velocity + (force * c["power"] - 0.0025 * np.cos(3 * position))
    velocity = np.clip(velocity, -c["max_speed"], c["max_speed"])
    position = np.clip(position + velocity, c["min_position"], c["max_position"])
    velocity = np.where((position == c["min_position"]) & (velocity < 0), 0.0, velocity)
    terminal = (position >= c["goal_position"]) & (velocity >= c["goal_velocity"])
    # the reference charges the action cost on the unclipped action
    reward = np.where(terminal, 100.0, 0.0) - u**2 * 0.1
    return np.stack([position, velocity], axis=1), reward, terminal


def angle_normalize(x):
    return ((x + np.pi) % (2 * np.pi)) - np.pi


def _pendulum_dynamics(c, s, a):
    th, thdot = s[:, 0], s[:, 1]
    u = np.clip(np.asarray(a, dtype=float).reshape(len(s), -1)[:, 0], -c["max_torque"], c["max_torque"])
    g, m, l, dt = c["g"], c["m"], c["l"], c["dt"]
    costs = angle_normalize(th) ** 2 + 0.1 * thdot**2 + 0.001 * (u**2)
    newthdot = thdot + (-3 * g / (2 * l) * np.sin(th + np.pi) + 3.0 / (m * l**2) * u) * dt
    newth = th + newthdot * dt
    newthdot = np.clip(newthdot, -c["max_speed"], c["max_speed"])
    return np.stack([newth, newthdot], axis=1), -costs, np.zeros(len(s), dtype=bool)


_DYNAMICS = {
    "CartPole-v0": _cartpole_dynamics,
    "MountainCarContinuous-v0": _mountain_car_dynamics,
    "Pendulum-v0": _pendulum_dynamics,
}


def observe_batch(spec: EnvSpec, states: np.ndarray) -> np.ndarray:
    if spec.name == "Pendulum-v0":
        return np.stack([np.cos(states[:, 0]), np.sin(states[:, 0]), states[:, 1]], axis=1)
    return states


def step_batch(spec: EnvSpec, states, actions):
    return _DYNAMICS[spec.name](spec.constants, np.asarray(states, dtype=float), actions)


def initial_state(spec: EnvSpec, seed: int) -> np.ndarray:
    gen = rng(seed)
    if spec.name == "CartPole-v0":
        return gen.uniform(-0.05, 0.05, size=4)
    if spec.name == "Pendulum-v0":
        high = np.array([np.pi, 1.0])
        return gen.uniform(-high, high)
    return np.array([gen.uniform(-0.6, -0.4), 0.0])


# --- single-episode API -----------------------------------------------------

def reset(spec: EnvSpec, seed: int) -> EnvState:
    return EnvState(initial_state(spec, seed))


def observe(spec: EnvSpec, state: EnvState) -> np.ndarray:
    return observe_batch(spec, state.values[None, :])[0]


def step(spec: EnvSpec, state: EnvState, action) -> tuple[EnvState, float]:
    if state.done:
        raise ContractViolation(f"{spec.name}: step() called after the episode finished")
    if spec.action_spec.kind == "discrete":
        if int(action) != action or not 0 <= int(action) < spec.action_spec.n_actions:
            raise ValueError(f"invalid discrete action {action!r}")
        act = np.array([int(action)])
    else:
        act = np.asarray(action, dtype=float).reshape(1, -1)
    new, reward, terminal = step_batch(spec, state.values[None, :], act)
    steps = state.steps + 1
    done = bool(terminal[0]) or steps >= spec.max_steps
    return EnvState(new[0], steps, done), float(reward[0])


def rollout_batch(spec: EnvSpec, policy: MlpPolicy, thetas, seeds):
    """Run one episode per (theta, seed) row in lock-step.

    Returns ``(total_returns, steps, terminated_early)`` arrays. Each row's
    numbers equal what a solitary rollout of that row produces.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    n = len(thetas)
    states = np.array([initial_state(spec, int(s)) for s in seeds]).reshape(n, spec.state_dim)
    returns = np.zeros(n)
    steps = np.zeros(n, dtype=int)
    terminated = np.zeros(n, dtype=bool)
    active = np.arange(n)
    th_active = thetas
    for _ in range(spec.max_steps):
        if active.size == 0:
            break
        obs = observe_batch(spec, states[active])
        actions = policy.act_batch(th_active, obs)
        new, reward, terminal = step_batch(spec, states[active], actions)
        states[active] = new
        returns[active] += reward
        steps[active] += 1
        if terminal.any():
            terminated[active[terminal]] = True
            keep = ~terminal
            active = active[keep]
            th_active = th_active[keep]
    return returns, steps, terminated


def rollout(spec: EnvSpec, policy: MlpPolicy, theta, seed: int) -> EpisodeResult:
    if policy.obs_dim != spec.obs_dim or policy.action_spec != spec.action_spec:
        raise ValueError(f"policy dimensions do not match {spec.name}")
    ret, steps, term = rollout_batch(spec, policy, np.asarray(theta, dtype=float)[None, :], [seed])
    return EpisodeResult(float(ret[0]), int(steps[0]), bool(term[0]))


def policy_for(spec: EnvSpec, hidden_dim: int = 16) -> MlpPolicy:
    return MlpPolicy(spec.obs_dim, spec.action_spec, hidden_dim)


class RolloutObjective(ObjectiveHandle):
    """J(theta, seed): undiscounted return of one episode of ``spec`` under the MLP policy."""

    def __init__(self, env: str | EnvSpec, hidden_dim: int = 16):
        self.spec = make_env(env) if isinstance(env, str) else env
        self.policy = policy_for(self.spec, hidden_dim)
        self.dimension = self.policy.param_count

    def evaluate(self, theta, seed):
        return rollout(self.spec, self.policy, theta, seed).total_return

    def evaluate_batch(self, points, seeds):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.dimension:
            raise ValueError(f"expected parameter vectors of length {self.dimension}")
        return rollout_batch(self.spec, self.policy, points, seeds)[0]

    def describe(self):
        key = _ALIASES[self.spec.name.lower()]
        return {"kind": "rollout", "env": key, "hidden_dim": self.policy.hidden_dim}

    def initial_params(self, seed: int) -> np.ndarray:
        return self.policy.init_params(seed)
