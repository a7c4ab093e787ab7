"""Seeded weight initializers."""

from __future__ import annotations

import numpy as np

from .tensor import DTYPE


def orthogonal_init(shape: tuple[int, int], rng_seed: int) -> np.ndarray:
    """A random semi-orthogonal matrix: orthonormal columns when rows >=
    cols (Q^T Q = I), orthonormal rows otherwise."""
    if len(shape) != 2:
        raise ValueError(f"orthogonal init needs a 2-D shape, got {shape}")
    rows, cols = shape
    rng = np.random.default_rng(rng_seed)
    gaussian = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q, dtype=DTYPE)


def uniform_init(shape: tuple[int, ...], low: float, high: float, rng_seed: int) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(low, high, size=shape).astype(DTYPE)
