"""Deterministic seed derivation shared by every module that draws random numbers."""

import hashlib
import struct

import numpy as np

# stream tags keep independent consumers of the master seed apart
GRADIENT_STREAM = 1
FRAME_STREAM = 2
RADII_STREAM = 3
EVAL_STREAM = 4
INIT_STREAM = 5
MC_STREAM = 6


def derive_seed(*keys: int) -> int:
    """Hash a tuple of integers into a non-negative 63-bit seed (blake2b)."""
    payload = struct.pack(f"<{len(keys)}q", *(int(k) for k in keys))
    digest = hashlib.blake2b(payload, digest_size=8, person=b"dgs-es").digest()
    return int.from_bytes(digest, "little") >> 1


def rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox 4x64) so draws are platform-independent."""
    return np.random.Generator(np.random.Philox(int(seed)))
