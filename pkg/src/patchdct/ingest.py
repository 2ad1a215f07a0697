"""COCO-style annotation ingestion, crop rasterization, resampling and synthetic corpora."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InputError, ParseError, RecordError
from .masks import as_mask, binarize, mask_digest

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rle:
    """Uncompressed COCO RLE: alternating run lengths, starting with zeros, column-major."""

    counts: tuple
    height: int
    width: int


@dataclass(frozen=True)
class InstanceRecord:
    id: int
    bbox: tuple  # (x, y, w, h) in image pixels
    segmentation: Union[tuple, Rle]  # tuple of flat polygons, or Rle
    category_id: Optional[int] = None

    @property
    def is_polygon(self) -> bool:
        return not isinstance(self.segmentation, Rle)

    def to_dict(self) -> dict:
        if isinstance(self.segmentation, Rle):
            seg = {
                "counts": list(self.segmentation.counts),
                "size": [self.segmentation.height, self.segmentation.width],
            }
        else:
            seg = [list(p) for p in self.segmentation]
        out = {"id": self.id, "bbox": list(self.bbox), "segmentation": seg}
        if self.category_id is not None:
            out["category_id"] = self.category_id
        return out


@dataclass
class ParseResult:
    records: list
    errors: list  # RecordError instances for rejected records

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def record_from_dict(item, index=None) -> InstanceRecord:
    if not isinstance(item, dict):
        raise RecordError("annotation must be an object", index)
    rid = item.get("id", index)
    try:
        bbox = item["bbox"]
        seg = item["segmentation"]
    except KeyError as exc:
        raise RecordError(f"missing field {exc.args[0]!r}", index, rid) from None
    if not (isinstance(bbox, list) and len(bbox) == 4 and all(_number(v) for v in bbox)):
        raise RecordError("bbox must be four numbers", index, rid)
    if bbox[2] <= 0 or bbox[3] <= 0:
        raise RecordError("bbox must have positive area", index, rid)

    if isinstance(seg, dict):
        counts, size = seg.get("counts"), seg.get("size")
        if isinstance(counts, str):
            raise RecordError("compressed RLE strings are not supported", index, rid)
        if not (isinstance(counts, list) and all(isinstance(c, int) and c >= 0 for c in counts)):
            raise RecordError("RLE counts must be non-negative integers", index, rid)
        if not (isinstance(size, list) and len(size) == 2 and all(isinstance(s, int) and s > 0 for s in size)):
            raise RecordError("RLE size must be [height, width]", index, rid)
        if sum(counts) != size[0] * size[1]:
            raise RecordError(
                f"RLE counts sum to {sum(counts)}, expected {size[0] * size[1]}", index, rid
            )
        segmentation = Rle(tuple(counts), size[0], size[1])
    elif isinstance(seg, list) and seg:
        polys = []
        for poly in seg:
            if not (isinstance(poly, list) and all(_number(v) for v in poly)):
                raise RecordError("polygon must be a flat list of numbers", index, rid)
            if len(poly) % 2 or len(poly) < 6:
                raise RecordError("polygon needs at least 3 (x, y) points", index, rid)
            polys.append(tuple(float(v) for v in poly))
        segmentation = tuple(polys)
    else:
        raise RecordError("segmentation must be a polygon list or an RLE object", index, rid)

    cat = item.get("category_id")
    return InstanceRecord(
        id=rid,
        bbox=tuple(float(v) for v in bbox),
        segmentation=segmentation,
        category_id=cat if isinstance(cat, int) else None,
    )


def parse_annotations(text: str) -> ParseResult:
    """Parse an annotation document; bad records are collected, not fatal."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("annotations"), list):
        raise ParseError("document must be an object with an 'annotations' array", "$")
    records, errors = [], []
    for i, item in enumerate(doc["annotations"]):
        try:
            records.append(record_from_dict(item, i))
        except RecordError as exc:
            log.warning("skipping annotation %d: %s", i, exc)
            errors.append(exc)
    return ParseResult(records, errors)


def dump_annotations(records) -> str:
    return json.dumps({"annotations": [r.to_dict() for r in records]})


def _fill_polygon(poly: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Even-odd fill sampled at pixel centres; ``poly`` is (P, 2) in grid units."""
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    yc = np.arange(rows)[:, None] + 0.5
    # half-open rule so a vertex shared by two edges is counted once
    crosses = (y0 <= yc) != (y1 <= yc)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x0 + (yc - y0) * (x1 - x0) / (y1 - y0)
    xi = np.where(crosses, xi, -np.inf)
    xc = np.arange(cols) + 0.5
    parity = np.count_nonzero(xi[:, None, :] > xc[None, :, None], axis=2) % 2
    return parity.astype(bool)


def rle_decode(rle: Rle) -> np.ndarray:
    flat = np.zeros(rle.height * rle.width, dtype=np.uint8)
    pos, val = 0, 0
    for c in rle.counts:
        flat[pos:pos + c] = val
        pos += c
        val ^= 1
    return flat.reshape(rle.width, rle.height).T.copy()


def rasterize(rec: InstanceRecord, size: int) -> np.ndarray:
    """Crop the instance to its box and scan-convert it onto a K x K grid.

    Separate polygons of one instance are unioned; each polygon is filled
    with the even-odd rule.
    """
    if size < 1:
        raise InputError(f"size must be >= 1, got {size}")
    x, y, w, h = rec.bbox
    if not (w > 0 and h > 0):
        raise InputError(f"degenerate box {rec.bbox}")
    if rec.is_polygon:
        out = np.zeros((size, size), dtype=bool)
        for flat in rec.segmentation:
            pts = np.asarray(flat, dtype=np.float64).reshape(-1, 2)
            grid = np.column_stack([(pts[:, 0] - x) * size / w, (pts[:, 1] - y) * size / h])
            out |= _fill_polygon(grid, size, size)
        return out.astype(np.uint8)
    full = rle_decode(rec.segmentation)
    r0, c0 = int(math.floor(y)), int(math.floor(x))
    r1, c1 = int(math.ceil(y + h)), int(math.ceil(x + w))
    crop = np.zeros((r1 - r0, c1 - c0), dtype=np.uint8)
    src = full[max(r0, 0):min(r1, full.shape[0]), max(c0, 0):min(c1, full.shape[1])]
    crop[max(-r0, 0):max(-r0, 0) + src.shape[0], max(-c0, 0):max(-c0, 0) + src.shape[1]] = src
    return resize_mask(crop, size)


def _area_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) matrix of exact overlap fractions between resampled cells."""
    edges_dst = np.arange(dst + 1) * (src / dst)
    lo = np.maximum(edges_dst[:-1, None], np.arange(src)[None, :])
    hi = np.minimum(edges_dst[1:, None], np.arange(src)[None, :] + 1)
    return np.clip(hi - lo, 0.0, None) * (dst / src)


def resize_mask(mask, target) -> np.ndarray:
    """Area-average resample to ``target`` (int or (rows, cols)), then strict 0.5 threshold."""
    m = as_mask(mask, square=False)
    rows, cols = (target, target) if isinstance(target, int) else target
    if rows < 1 or cols < 1:
        raise InputError(f"target size must be >= 1, got {target}")
    if (rows, cols) == m.shape:
        return m.copy()
    avg = _area_weights(m.shape[0], rows) @ m.astype(np.float64) @ _area_weights(m.shape[1], cols).T
    return binarize(avg)


# synthetic corpus ---------------------------------------------------------

MIN_FRACTION = 0.05
MAX_FRACTION = 0.95
_MAX_ATTEMPTS = 1000


def _ellipse(rng: np.random.Generator, size: int, yy: np.ndarray, xx: np.ndarray, scale=1.0):
    cy, cx = rng.uniform(0.2, 0.8, 2) * size
    ay, ax = rng.uniform(0.08, 0.35, 2) * size * scale
    theta = rng.uniform(0.0, math.pi)
    c, s = math.cos(theta), math.sin(theta)
    dy, dx = yy - cy, xx - cx
    u = (dx * c + dy * s) / ax
    v = (-dx * s + dy * c) / ay
    return u * u + v * v <= 1.0


def _has_mixed_patch(mask: np.ndarray, m: int = 8) -> bool:
    k = mask.shape[0]
    if k % m:
        return True
    g = k // m
    sums = mask.reshape(g, m, g, m).sum(axis=(1, 3))
    return bool(np.any((sums > 0) & (sums < m * m)))


def synth_mask(seed: int, index: int, size: int) -> np.ndarray:
    """One deterministic blob: union of 1-4 ellipses, sometimes with an elliptical hole."""
    rng = np.random.default_rng([seed, index])
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    for _ in range(_MAX_ATTEMPTS):
        blob = np.zeros((size, size), dtype=bool)
        for _ in range(int(rng.integers(1, 5))):
            blob |= _ellipse(rng, size, yy, xx)
        if rng.random() < 0.3:
            blob &= ~_ellipse(rng, size, yy, xx, scale=0.4)
        mask = blob.astype(np.uint8)
        frac = mask.mean()
        if MIN_FRACTION <= frac <= MAX_FRACTION and _has_mixed_patch(mask):
            return mask
    raise RuntimeError(f"could not draw a valid mask for seed={seed} index={index}")


def synth_corpus(seed: int, count: int, size: int) -> list:
    """``count`` masks; mask i depends only on (seed, i, size)."""
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    if size < 2:
        raise InputError(f"size must be >= 2, got {size}")
    return [synth_mask(seed, i, size) for i in range(count)]


def corpus_manifest(seed: int, count: int, size: int, masks) -> dict:
    return {
        "seed": seed,
        "count": count,
        "K": size,
        "masks": [{"index": i, "sha256": mask_digest(m)} for i, m in enumerate(masks)],
    }
