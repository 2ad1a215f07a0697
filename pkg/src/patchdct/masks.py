"""Binary mask validation and the shared binarization rule."""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InputError

THRESHOLD = 0.5
# Reconstructions land on exact 0.5 only up to rounding noise (e.g. a DC of
# K/2 at resolution K); values within this margin above 0.5 count as ties.
TIE_TOLERANCE = 1e-9


def as_mask(mask, name="mask", square=True) -> np.ndarray:
    """Validate a {0,1} grid and return it as a uint8 array."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 2-D grid, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise InputError(f"{name} must be square, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise InputError(f"{name} must contain only 0 and 1")
    return arr.astype(np.uint8)


def binarize(values) -> np.ndarray:
    """Strict midpoint rule: value > 0.5 becomes 1, everything else 0."""
    return (np.asarray(values, dtype=np.float64) > THRESHOLD + TIE_TOLERANCE).astype(np.uint8)


def mask_digest(mask) -> str:
    arr = as_mask(mask, square=False)
    h = hashlib.sha256()
    h.update(f"{arr.shape[0]}x{arr.shape[1]}:".encode())
    h.update(np.packbits(arr, axis=None).tobytes())
    return h.hexdigest()
