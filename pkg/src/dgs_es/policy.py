"""Two-layer tanh MLP policy over a flat parameter vector.

Parameter layout (layer-major, weights then bias, weights row-major)::

    W1 (hidden x obs) | b1 (hidden) | W2 (out x hidden) | b2 (out)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import INIT_STREAM, derive_seed, rng

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class ActionSpec:
    kind: str
    n_actions: int = 0
    low: tuple = ()
    high: tuple = ()

    def __post_init__(self):
        if self.kind == DISCRETE:
            if self.n_actions < 1:
                raise ValueError("discrete action spec needs n_actions >= 1")
        elif self.kind == CONTINUOUS:
            if len(self.low) != len(self.high) or not self.low:
                raise ValueError("continuous bounds must be non-empty and equal length")
            if any(lo >= hi for lo, hi in zip(self.low, self.high)):
                raise ValueError("continuous bounds need low < high elementwise")
        else:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @classmethod
    def discrete(cls, n_actions: int) -> "ActionSpec":
        return cls(DISCRETE, n_actions=int(n_actions))

    @classmethod
    def continuous(cls, low, high) -> "ActionSpec":
        return cls(CONTINUOUS, low=tuple(float(x) for x in np.atleast_1d(low)),
                   high=tuple(float(x) for x in np.atleast_1d(high)))

    @property
    def out_dim(self) -> int:
        return self.n_actions if self.kind == DISCRETE else len(self.low)


@dataclass(frozen=True)
class MlpPolicy:
    obs_dim: int
    action_spec: ActionSpec
    hidden_dim: int = 16

    @property
    def out_dim(self) -> int:
        return self.action_spec.out_dim

    @property
    def param_count(self) -> int:
        return (self.obs_dim + 1) * self.hidden_dim + (self.hidden_dim + 1) * self.out_dim

    def _slices(self):
        h, o, a = self.hidden_dim, self.obs_dim, self.out_dim
        ends = np.cumsum([h * o, h, a * h, a])
        return (slice(0, ends[0]), slice(ends[0], ends[1]),
                slice(ends[1], ends[2]), slice(ends[2], ends[3]))

    def unflatten(self, theta):
        """Split (..., P) parameters into (W1, b1, W2, b2) with leading batch axes kept."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.param_count:
            raise ValueError(f"expected {self.param_count} parameters, got {theta.shape[-1]}")
        lead = theta.shape[:-1]
        s1, s2, s3, s4 = self._slices()
        return (theta[..., s1].reshape(*lead, self.hidden_dim, self.obs_dim),
                theta[..., s2],
                theta[..., s3].reshape(*lead, self.out_dim, self.hidden_dim),
                theta[..., s4])

    def flatten(self, w1, b1, w2, b2) -> np.ndarray:
        parts = [np.asarray(w1), np.asarray(b1), np.asarray(w2), np.asarray(b2)]
        lead = parts[1].shape[:-1]
        return np.concatenate([p.reshape(*lead, -1) for p in parts], axis=-1)

    def forward(self, theta, obs) -> np.ndarray:
        """Raw outputs W2 tanh(W1 obs + b1) + b2 for batched (B, P) / (B, obs) inputs.

        Dot products are accumulated one input index at a time so each row's
        result is independent of the batch it is computed in.
        """
        w1, b1, w2, b2 = self.unflatten(theta)
        obs = np.asarray(obs, dtype=float)
        pre = b1 + w1[..., 0] * obs[..., None, 0]
        for j in range(1, self.obs_dim):
            pre = pre + w1[..., j] * obs[..., None, j]
        h = np.tanh(pre)
        out = b2 + w2[..., 0] * h[..., None, 0]
        for k in range(1, self.hidden_dim):
            out = out + w2[..., k] * h[..., None, k]
        return out

    def act_batch(self, theta, obs) -> np.ndarray:
        out = self.forward(theta, obs)
        spec = self.action_spec
        if spec.kind == DISCRETE:
            return np.argmax(out, axis=-1)  # first maximum wins ties
        low, high = np.array(spec.low), np.array(spec.high)
        return low + (np.tanh(out) + 1.0) / 2.0 * (high - low)

    def act(self, theta, obs):
        """Deterministic action for one observation (int for discrete, array for continuous)."""
        obs = np.asarray(obs, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if obs.shape != (self.obs_dim,):
            raise ValueError(f"observation must have shape ({self.obs_dim},), got {obs.shape}")
        if theta.shape != (self.param_count,):
            raise ValueError(f"theta must have shape ({self.param_count},), got {theta.shape}")
        a = self.act_batch(theta[None, :], obs[None, :])[0]
        return int(a) if self.action_spec.kind == DISCRETE else a

    def init_params(self, seed: int) -> np.ndarray:
        """Per-layer N(0, 1/fan_in) for weights and biases."""
        gen = rng(derive_seed(seed, INIT_STREAM))
        h, o, a = self.hidden_dim, self.obs_dim, self.out_dim
        layer1 = gen.normal(0.0, 1.0 / math.sqrt(o), size=h * o + h)
        layer2 = gen.normal(0.0, 1.0 / math.sqrt(h), size=a * h + a)
        return np.concatenate([layer1[: h * o], layer1[h * o:], layer2[: a * h], layer2[a * h:]])


def param_count(policy: MlpPolicy) -> int:
    return policy.param_count


_MAGIC = "dgs-es-params"
_VERSION = 1


def save_params(path, policy: MlpPolicy, theta) -> None:
    """Write a checkpoint: one JSON header line, then little-endian float64 values."""
    theta = np.asarray(theta, dtype="<f8")
    if theta.shape != (policy.param_count,):
        raise ValueError("parameter vector does not match policy")
    header = {
        "format": _MAGIC, "version": _VERSION, "obs_dim": policy.obs_dim,
        "hidden_dim": policy.hidden_dim, "action_kind": policy.action_spec.kind,
        "out_dim": policy.out_dim, "count": int(theta.size),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(theta.tobytes())


def load_params(path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    line, _, body = raw.partition(b"\n")
    header = json.loads(line)
    if header.get("format") != _MAGIC or header.get("version") != _VERSION:
        raise ValueError(f"{path}: not a version-{_VERSION} parameter checkpoint")
    theta = np.frombuffer(body, dtype="<f8")
    if theta.size != header["count"]:
        raise ValueError(f"{path}: expected {header['count']} values, found {theta.size}")
    return header, theta.astype(float)
