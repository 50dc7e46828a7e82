"""Record reference trajectories from gym 0.17.3 for the environment fidelity tests.

Needs an interpreter with ``gym==0.17.3`` installed (not a dependency of the
package), e.g.::

    python3 -m venv /tmp/gymenv && /tmp/gymenv/bin/pip install gym==0.17.3
    /tmp/gymenv/bin/python scripts/make_fixtures.py tests/fixtures

Each CSV has a row per step: ``step, s0..sK, action, reward, done``; row 0
holds the initial state (action/reward empty).
"""

import csv
import sys
from pathlib import Path

import gym
import numpy as np

N_STEPS = 20

TASKS = {
    "cartpole": "CartPole-v0",
    "mountaincar": "MountainCarContinuous-v0",
    "pendulum": "Pendulum-v0",
}


def actions_for(key, k, rs):
    if key == "cartpole":
        patterns = [
            [i % 2 for i in range(N_STEPS)],
            [1] * 6 + [0] * 7 + [1] * 7,
            list(rs.randint(0, 2, size=N_STEPS)),
        ]
        return [int(a) for a in patterns[k]]
    if key == "mountaincar":
        patterns = [
            np.ones(N_STEPS),
            np.sin(np.arange(N_STEPS) / 3.0),
            rs.uniform(-1.0, 1.0, size=N_STEPS),
        ]
    else:
        patterns = [
            np.full(N_STEPS, 2.0),
            2.0 * np.cos(np.arange(N_STEPS) / 2.0),
            rs.uniform(-2.0, 2.0, size=N_STEPS),
        ]
    return [np.array([float(a)]) for a in patterns[k]]


def record(key, k, out_dir):
    env = gym.make(TASKS[key]).unwrapped
    env.seed(1000 + k)
    env.reset()
    rs = np.random.RandomState(77 + k)
    state = np.array(env.state, dtype=float)
    rows = [[0, *map(repr, state.tolist()), "", "", 0]]
    for t, a in enumerate(actions_for(key, k, rs), start=1):
        _, reward, done, _ = env.step(a)
        state = np.array(env.state, dtype=float)
        act = a if isinstance(a, int) else float(a[0])
        rows.append([t, *map(repr, state.tolist()), repr(act), repr(float(reward)), int(done)])
        if done:
            break
    path = Path(out_dir) / f"{key}_{k}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", *[f"s{i}" for i in range(len(state))], "action", "reward", "done"])
        writer.writerows(rows)
    print(path, len(rows) - 1, "steps")


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures"
    Path(out).mkdir(parents=True, exist_ok=True)
    for key in TASKS:
        for k in range(3):
            record(key, k, out)
