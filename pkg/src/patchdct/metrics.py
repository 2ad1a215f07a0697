"""Mask IoU, boundary IoU and corpus aggregation.

Boundary bands come from an exact Euclidean distance transform: a vertical
1-D pass followed by the lower-envelope-of-parabolas pass along rows
(Felzenszwalb & Huttenlocher).  Pixels outside the frame count as background.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .masks import as_mask

BOUNDARY_DILATION_RATIO = 0.02
REPORT_SCHEMA_VERSION = 1


def _pair(a, b):
    a = as_mask(a, "a", square=False)
    b = as_mask(b, "b", square=False)
    if a.shape != b.shape:
        raise InputError(f"mask sizes differ: {a.shape} vs {b.shape}")
    return a.astype(bool), b.astype(bool)


def confusion(pred, truth) -> dict:
    """Pixel counts of true/false positives and negatives."""
    p, t = _pair(pred, truth)
    return {
        "tp": int(np.count_nonzero(p & t)),
        "fp": int(np.count_nonzero(p & ~t)),
        "fn": int(np.count_nonzero(~p & t)),
        "tn": int(np.count_nonzero(~p & ~t)),
    }


def iou(a, b) -> float:
    """Intersection over union; two empty masks score 1."""
    a, b = _pair(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def _envelope_1d(f: np.ndarray) -> np.ndarray:
    """Squared-distance transform of a sampled function (lower envelope of parabolas)."""
    n = f.shape[0]
    out = np.empty(n)
    v = [0] * n
    z = [0.0] * (n + 1)
    z[0], z[1] = -math.inf, math.inf
    k = 0
    fl = f.tolist()
    for q in range(1, n):
        while True:
            p = v[k]
            s = ((fl[q] + q * q) - (fl[p] + p * p)) / (2 * q - 2 * p)
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        out[q] = (q - p) * (q - p) + fl[p]
    return out


def squared_distance_to_background(mask) -> np.ndarray:
    """Exact squared Euclidean distance from each pixel to the nearest background pixel.

    The image is surrounded by a one-pixel background frame, so every
    foreground pixel has a finite distance.
    """
    m = as_mask(mask, square=False)
    padded = np.pad(m, 1).astype(bool)
    rows, cols = padded.shape
    # vertical pass: distance to nearest zero within each column
    col = np.zeros(padded.shape)
    for r in range(1, rows):
        col[r] = np.where(padded[r], col[r - 1] + 1, 0)
    for r in range(rows - 2, -1, -1):
        col[r] = np.minimum(col[r], col[r + 1] + 1)
    g = col * col
    out = np.empty_like(g)
    for r in range(rows):
        if padded[r].any():
            out[r] = _envelope_1d(g[r])
        else:
            out[r] = 0.0
    return out[1:-1, 1:-1]


def default_band(size: int) -> int:
    """Band width for a K x K crop: 2% of the diagonal, at least one pixel."""
    return max(1, int(math.floor(BOUNDARY_DILATION_RATIO * math.sqrt(2.0) * size + 0.5)))


def boundary_band(mask, d: float) -> np.ndarray:
    """Foreground pixels within Euclidean distance ``d`` of the complement."""
    if d < 1:
        raise InputError(f"band width must be >= 1, got {d}")
    m = as_mask(mask, square=False)
    band = (m == 1) & (squared_distance_to_background(m) <= d * d)
    return band.astype(np.uint8)


def boundary_iou(a, b, d: Optional[float] = None) -> float:
    a, b = _pair(a, b)
    if d is None:
        d = default_band(max(a.shape))
    return iou(boundary_band(a, d), boundary_band(b, d))


@dataclass(frozen=True)
class EvalRow:
    name: str
    iou: float
    boundary_iou: float

    def __post_init__(self):
        for v in (self.iou, self.boundary_iou):
            if not 0.0 <= v <= 1.0:
                raise InputError(f"score out of [0, 1]: {v}")


@dataclass
class EvalReport:
    count: int
    mean_iou: float
    min_iou: float
    max_iou: float
    mean_boundary_iou: float
    min_boundary_iou: float
    max_boundary_iou: float
    rows: list
    key: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "count": self.count,
            "mean_iou": self.mean_iou,
            "min_iou": self.min_iou,
            "max_iou": self.max_iou,
            "mean_boundary_iou": self.mean_boundary_iou,
            "min_boundary_iou": self.min_boundary_iou,
            "max_boundary_iou": self.max_boundary_iou,
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "key": dict(self.key),
            "summary": self.summary(),
            "rows": [{"name": r.name, "iou": r.iou, "boundary_iou": r.boundary_iou} for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "iou", "boundary_iou"])
        for r in self.rows:
            w.writerow([r.name, f"{r.iou:.6f}", f"{r.boundary_iou:.6f}"])
        w.writerow(["__mean__", f"{self.mean_iou:.6f}", f"{self.mean_boundary_iou:.6f}"])
        return buf.getvalue()


def aggregate(rows: Sequence[EvalRow], key: Optional[dict] = None) -> EvalReport:
    """Exact (correctly rounded) means and extrema; independent of row order."""
    rows = list(rows)
    if not rows:
        raise InputError("cannot aggregate an empty set of rows")
    ious = [r.iou for r in rows]
    bious = [r.boundary_iou for r in rows]
    return EvalReport(
        count=len(rows),
        mean_iou=math.fsum(ious) / len(rows),
        min_iou=min(ious),
        max_iou=max(ious),
        mean_boundary_iou=math.fsum(bious) / len(rows),
        min_boundary_iou=min(bious),
        max_boundary_iou=max(bious),
        rows=rows,
        key=dict(key or {}),
    )


def evaluate_pair(name: str, pred, truth, d: Optional[float] = None) -> EvalRow:
    return EvalRow(name, iou(pred, truth), boundary_iou(pred, truth, d))
