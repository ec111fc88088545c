"""Numerical foundation: dense matrix helpers, the logistic function and the
seeded random stream every stochastic routine draws from.

Matrices and vectors are plain ``numpy.float64`` arrays in C (row-major)
order. The random stream is numpy's Philox4x32-10 counter-based bit
generator, whose output is specified bit-for-bit independently of platform.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

__all__ = ["Prng", "as_matrix", "as_vector", "matvec", "sigmoid", "bernoulli_sample",
           "check_finite"]

_SEED_MASK = (1 << 64) - 1


class Prng:
    """Seeded random stream backed by Philox4x32-10.

    A ``Prng`` is single-owner. To hand randomness to independent workers,
    derive child streams with :meth:`child` rather than sharing one instance.
    """

    def __init__(self, seed: int = 0):
        seed = int(seed)
        if seed < 0 or seed > _SEED_MASK:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(seed))

    def uniform(self, size=None) -> np.ndarray | float:
        """Uniform draws on [0, 1); one draw per element."""
        return self._gen.random(size)

    def normal(self, scale: float, size) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, high: int, size=None):
        return self._gen.integers(0, high, size)

    def child(self, key: int) -> "Prng":
        """Independent stream for sub-task ``key`` (seed XOR key)."""
        return Prng((self.seed ^ int(key)) & _SEED_MASK)

    def __repr__(self):
        return f"Prng(seed={self.seed})"


def as_rng(rng: Prng | int | None, default_seed: int = 0) -> Prng:
    if isinstance(rng, Prng):
        return rng
    return Prng(default_seed if rng is None else rng)


def as_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"{name}: non-finite values encountered")


def matvec(M, x) -> np.ndarray:
    """``M @ x`` with an explicit shape check."""
    M = as_matrix(M)
    x = as_vector(x)
    if M.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: matrix {M.shape[0]}x{M.shape[1]} "
                         f"vs vector of length {x.shape[0]}")
    return M @ x


def sigmoid(x):
    """Logistic function; saturates to 0/1 instead of overflowing."""
    return expit(x)


def bernoulli_sample(p, rng: Prng):
    """Draw bits with success probability ``p`` (scalar or array).

    Consumes exactly one uniform draw per element.
    """
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~((p_arr >= 0.0) & (p_arr <= 1.0))):
        raise ValueError("bernoulli probability outside [0, 1]")
    u = rng.uniform(p_arr.shape if p_arr.ndim else None)
    bits = (u < p_arr).astype(np.float64)
    return bits if p_arr.ndim else int(bits)
