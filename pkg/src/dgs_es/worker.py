"""Process worker and its line protocol (``dgs-wire/1``).

A worker is a subprocess running :func:`serve`, talking over stdin/stdout, one message
per line, fields separated by single spaces, reals as ``float.hex`` strings so
values round-trip exactly.

master -> worker::

    HELLO dgs-wire/1 <objective json>      once; worker answers READY dgs-wire/1
    THETA <n> <x_1> ... <x_n>              broadcast the current parameters
    FRAME <n> <row-major n*n entries>      broadcast the frame (only when it changes)
    RADII <n> <s_1> ... <s_n>
    RULE <M>                               Gauss-Hermite order
    TASK <i> <m> <seed> <crc32>            point theta + sqrt(2) s_i v_m xi_i
    POINT <k> <seed> <x_1> ... <x_n>       explicit point (baseline estimator)
    RUN                                    evaluate queued tasks
    BYE

worker -> master::

    READY dgs-wire/1
    RESULT <tag> <value>                   tag is "i,m" for TASK, "k" for POINT
    ERROR <tag> <message>
    DONE                                   after the results of one RUN

Quadrature tasks carry only scalars: the worker rebuilds the point from the
broadcast state and checks it against the master's CRC32 of the point bytes.
"""

from __future__ import annotations

import json
import subprocess
import sys
import zlib

import numpy as np

from .gradient import node_offsets, quadrature_point
from .objective import EvaluationError
from .quadrature import build_gauss_hermite

PROTOCOL = "dgs-wire/1"
WORKER_ENTRY = "import sys; from dgs_es.worker import serve; sys.exit(serve())"


def _hex(values) -> str:
    return " ".join(float(x).hex() for x in np.ravel(values))


def _unhex(fields) -> np.ndarray:
    return np.array([float.fromhex(x) for x in fields])


def point_checksum(point) -> int:
    """CRC32 of the little-endian float64 bytes of a point."""
    return zlib.crc32(np.ascontiguousarray(point, dtype="<f8").tobytes())


def objective_from_spec(spec: dict):
    from .envs import RolloutObjective
    from .synthetic import synthetic_objective

    kind = spec.get("kind")
    if kind == "rollout":
        return RolloutObjective(spec["env"], spec.get("hidden_dim", 16))
    if kind == "synthetic":
        return synthetic_objective(spec["name"], spec["dim"])
    raise ValueError(f"cannot build objective from {spec!r}")


class RemoteWorker:
    """Master-side handle on one worker subprocess."""

    def __init__(self, objective_spec: dict, python: str | None = None):
        self.objective_spec = objective_spec
        self.proc = subprocess.Popen(
            [python or sys.executable, "-c", WORKER_ENTRY],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
        )
        self._send(f"HELLO {PROTOCOL} {json.dumps(objective_spec, sort_keys=True)}")
        reply = self._recv()
        if reply != f"READY {PROTOCOL}":
            raise EvaluationError(f"worker handshake failed: {reply!r}")
        self._sent = {}

    def _send(self, line: str):
        self.proc.stdin.write(line + "\n")

    def _recv(self) -> str:
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise EvaluationError(f"worker exited (code {self.proc.poll()})")
        return line.rstrip("\n")

    def _broadcast(self, key: str, line: str):
        if self._sent.get(key) != line:
            self._send(line)
            self._sent[key] = line

    def evaluate(self, tasks) -> np.ndarray:
        geoms = {id(t.geometry) for t in tasks}
        geom = tasks[0].geometry if len(geoms) == 1 else None
        if geom is not None:
            d = len(geom.theta)
            self._broadcast("THETA", f"THETA {d} {_hex(geom.theta)}")
            self._broadcast("FRAME", f"FRAME {d} {_hex(geom.frame)}")
            self._broadcast("RADII", f"RADII {d} {_hex(geom.radii)}")
            self._broadcast("RULE", f"RULE {geom.rule.order}")
            for t in tasks:
                i, m = t.task_id
                self._send(f"TASK {i} {m} {t.seed} {point_checksum(t.point)}")
            tags = [f"{t.task_id[0]},{t.task_id[1]}" for t in tasks]
        else:
            for k, t in enumerate(tasks):
                self._send(f"POINT {k} {t.seed} {_hex(t.point)}")
            tags = [str(k) for k in range(len(tasks))]
        self._send("RUN")
        got, errors = {}, []
        while True:
            line = self._recv()
            if line == "DONE":
                break
            kind, tag, rest = line.split(" ", 2)
            if kind == "ERROR":
                errors.append(f"{tag}: {rest}")
            else:
                got[tag] = float.fromhex(rest)
        if errors:
            raise EvaluationError("worker error on " + "; ".join(errors))
        return np.array([got[tag] for tag in tags])

    def close(self):
        if self.proc.poll() is None:
            try:
                self._send("BYE")
                self.proc.stdin.close()
            except (BrokenPipeError, OSError):
                pass
            self.proc.wait(timeout=10)


def serve(stdin=sys.stdin, stdout=sys.stdout) -> int:
    """Worker main loop."""
    objective = None
    theta = frame = radii = rule = offsets = None
    queue = []

    def emit(line):
        stdout.write(line + "\n")
        stdout.flush()

    for raw in stdin:
        fields = raw.split()
        if not fields:
            continue
        cmd = fields[0]
        if cmd == "HELLO":
            if fields[1] != PROTOCOL:
                emit(f"ERROR - unsupported protocol {fields[1]}")
                return 2
            objective = objective_from_spec(json.loads(raw.split(" ", 2)[2]))
            emit(f"READY {PROTOCOL}")
        elif cmd == "THETA":
            theta = _unhex(fields[2:])
        elif cmd == "FRAME":
            n = int(fields[1])
            frame = _unhex(fields[2:]).reshape(n, n)
        elif cmd == "RADII":
            radii = _unhex(fields[2:])
            offsets = None
        elif cmd == "RULE":
            rule = build_gauss_hermite(int(fields[1]))
            offsets = None
        elif cmd == "TASK":
            i, m, seed, crc = (int(x) for x in fields[1:5])
            if offsets is None:
                offsets = node_offsets(radii, rule)
            point = quadrature_point(theta, frame[i], offsets[i, m])
            if point_checksum(point) != crc:
                queue.append((f"{i},{m}", None, seed, "point checksum mismatch"))
            else:
                queue.append((f"{i},{m}", point, seed, None))
        elif cmd == "POINT":
            queue.append((fields[1], _unhex(fields[3:]), int(fields[2]), None))
        elif cmd == "RUN":
            ok = [q for q in queue if q[3] is None]
            for tag, _, _, err in queue:
                if err is not None:
                    emit(f"ERROR {tag} {err}")
            if ok:
                try:
                    values = objective.evaluate_batch(np.array([q[1] for q in ok]), [q[2] for q in ok])
                except Exception as exc:  # noqa: BLE001 - reported to the master
                    emit(f"ERROR {ok[0][0]} {type(exc).__name__}: {exc}")
                    values = []
                for q, v in zip(ok, values):
                    emit(f"RESULT {q[0]} {float(v).hex()}")
            queue = []
            emit("DONE")
        elif cmd == "BYE":
            return 0
        else:
            emit(f"ERROR - unknown command {cmd}")
    return 0


if __name__ == "__main__":
    sys.exit(serve())
