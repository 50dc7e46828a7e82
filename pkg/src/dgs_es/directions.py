"""Orthonormal search frames and per-direction smoothing radii.

A frame is a ``(d, d)`` array whose rows are the search directions; radii are a
``(d,)`` array of positive smoothing scales, one per row of the frame.
"""

from __future__ import annotations

import numpy as np

from .seeding import rng

ORTHO_TOL = 1e-10


def init_frame(d: int) -> np.ndarray:
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return np.eye(d)


def frame_error(frame: np.ndarray) -> float:
    """Max-entry deviation of frame @ frame.T from the identity."""
    frame = np.asarray(frame)
    return float(np.abs(frame @ frame.T - np.eye(frame.shape[0])).max())


def check_frame(frame, d: int | None = None) -> np.ndarray:
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 2 or frame.shape[0] != frame.shape[1]:
        raise ValueError(f"frame must be a square matrix, got shape {frame.shape}")
    if d is not None and frame.shape[0] != d:
        raise ValueError(f"frame is {frame.shape[0]}x{frame.shape[0]}, expected {d}x{d}")
    if frame_error(frame) > ORTHO_TOL:
        raise ValueError("frame rows are not orthonormal")
    return frame


def skew_perturbation(d: int, alpha: float, rng_seed: int) -> np.ndarray:
    """Random skew-symmetric matrix, strict upper triangle ~ U(-alpha, alpha)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    upper = np.triu(rng(rng_seed).uniform(-alpha, alpha, size=(d, d)), k=1)
    return upper - upper.T


def orthonormalize(a: np.ndarray) -> np.ndarray:
    """Q factor of ``a`` with the sign convention diag(R) > 0 (unique, deterministic)."""
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def perturb_frame(frame, alpha: float, rng_seed: int, compose: bool = False) -> np.ndarray:
    """New frame from the orthonormalized rotation I + dXi.

    By default the result replaces ``frame``; with ``compose=True`` the random
    rotation is applied to the current frame instead.
    """
    frame = np.asarray(frame, dtype=float)
    d = frame.shape[0]
    rotation = orthonormalize(np.eye(d) + skew_perturbation(d, alpha, rng_seed))
    return rotation @ frame if compose else rotation


def sample_radii(d: int, r: float, beta: float, rng_seed: int) -> np.ndarray:
    """d independent draws from U(r - beta, r + beta); requires r - beta > 0."""
    if beta < 0:
        raise ValueError(f"spread beta must be non-negative, got {beta}")
    if r - beta <= 0:
        raise ValueError(f"need r - beta > 0, got r={r}, beta={beta}")
    if beta == 0:
        return np.full(d, float(r))
    return rng(rng_seed).uniform(r - beta, r + beta, size=d)
