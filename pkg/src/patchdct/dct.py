"""Orthonormal 2-D DCT-II, its inverse, and JPEG-style zigzag ordering.

The fast path is separable: ``F = B @ M @ B.T`` with ``B[u, x] =
sqrt(2/K) * C(u) * cos((2x + 1) u pi / 2K)``.  ``dct2d_naive`` evaluates the
double sum for every coefficient directly and serves as the test oracle.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import InputError, LengthError

NAIVE_MAX_SIZE = 64


def _as_square(m, name="matrix"):
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 1:
        raise InputError(f"{name} must be square with K >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    return arr


def norm_factor(w: int) -> float:
    """C(w): 1/sqrt(2) for the DC index, 1 otherwise."""
    return 1.0 / math.sqrt(2.0) if w == 0 else 1.0


@lru_cache(maxsize=None)
def cosine_basis(size: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row ``u`` holds frequency ``u`` sampled at x=0..K-1.

    The returned array is read-only and shared between callers.
    """
    if size < 1:
        raise InputError(f"basis size must be >= 1, got {size}")
    k = np.arange(size, dtype=np.float64)
    basis = np.cos(np.outer(k, 2.0 * k + 1.0) * (math.pi / (2.0 * size)))
    basis *= math.sqrt(2.0 / size)
    basis[0] *= norm_factor(0)
    basis.setflags(write=False)
    return basis


def dct2d(m) -> np.ndarray:
    """Forward transform. Accepts a K x K array (or a stack of them)."""
    arr = _as_square(m)
    b = cosine_basis(arr.shape[-1])
    return b @ arr @ b.T


def idct2d(f) -> np.ndarray:
    """Inverse of :func:`dct2d`."""
    arr = _as_square(f)
    b = cosine_basis(arr.shape[-1])
    return b.T @ arr @ b


def dct2d_naive(m) -> np.ndarray:
    """Coefficient-by-coefficient evaluation of the defining double sum.

    O(K^4); restricted to K <= 64.
    """
    arr = _as_square(m)
    if arr.ndim != 2:
        raise InputError("dct2d_naive takes a single matrix")
    size = arr.shape[0]
    if size > NAIVE_MAX_SIZE:
        raise LengthError(f"dct2d_naive is limited to K <= {NAIVE_MAX_SIZE}, got {size}")
    x = np.arange(size, dtype=np.float64)[:, None]
    y = np.arange(size, dtype=np.float64)[None, :]
    out = np.empty((size, size))
    for u in range(size):
        for v in range(size):
            kernel = np.cos((2 * x + 1) * u * math.pi / (2 * size)) * np.cos(
                (2 * y + 1) * v * math.pi / (2 * size)
            )
            scale = (2.0 / size) * norm_factor(u) * norm_factor(v)
            out[u, v] = scale * float(np.sum(arr * kernel))
    return out


@lru_cache(maxsize=None)
def _zigzag_flat(size: int) -> np.ndarray:
    order = []
    for s in range(2 * size - 1):
        lo = max(0, s - size + 1)
        hi = min(s, size - 1)
        rows = range(lo, hi + 1) if s % 2 else range(hi, lo - 1, -1)
        order.extend(r * size + (s - r) for r in rows)
    flat = np.array(order, dtype=np.intp)
    flat.setflags(write=False)
    return flat


def zigzag_order(size: int) -> list[tuple[int, int]]:
    """(row, col) pairs in scan order: (0,0), (0,1), (1,0), (2,0), (1,1), ..."""
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    return [divmod(int(i), size) for i in _zigzag_flat(size)]


def zigzag_scan(f, n: int) -> np.ndarray:
    arr = _as_square(f)
    size = arr.shape[-1]
    if not 1 <= n <= size * size:
        raise LengthError(f"n must be in [1, {size * size}], got {n}")
    flat = arr.reshape(arr.shape[:-2] + (size * size,))
    return flat[..., _zigzag_flat(size)[:n]]


def zigzag_unscan(v, size: int) -> np.ndarray:
    vec = np.asarray(v, dtype=np.float64)
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    n = vec.shape[-1] if vec.ndim else 0
    if vec.ndim < 1 or n > size * size:
        raise LengthError(f"at most {size * size} coefficients fit a {size}x{size} matrix, got {n}")
    flat = np.zeros(vec.shape[:-1] + (size * size,))
    flat[..., _zigzag_flat(size)[:n]] = vec
    return flat.reshape(vec.shape[:-1] + (size, size))
