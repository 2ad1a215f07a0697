"""Patch-wise coding: m x m tiles labelled foreground / background / mixed.

Only mixed tiles carry a DCT vector.  Foreground and background tiles are
reconstructed as constants, so an edit to one tile's vector can never leak
into its neighbours.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .codec import DctVector, decode_mask
from .dct import dct2d, zigzag_scan
from .errors import ConfigError, ContractError, InputError, LengthError, ParseError, PatchClassError
from .masks import as_mask

DEFAULT_PATCH_SIZE = 8
DEFAULT_PATCH_DIM = 6
DEFAULT_MASK_SIZE = 112


class PatchClass(str, enum.Enum):
    BACKGROUND = "bg"
    FOREGROUND = "fg"
    MIXED = "mixed"


CLASS_ORDER = (PatchClass.FOREGROUND, PatchClass.BACKGROUND, PatchClass.MIXED)


@dataclass(frozen=True)
class PatchRecord:
    cls: PatchClass
    vector: Optional[DctVector] = None

    def __post_init__(self):
        object.__setattr__(self, "cls", PatchClass(self.cls))
        if self.cls is PatchClass.MIXED and self.vector is None:
            raise ContractError("mixed patch must carry a vector")
        if self.cls is not PatchClass.MIXED and self.vector is not None:
            raise ContractError(f"{self.cls.value} patch must not carry a vector")


@dataclass
class PatchGrid:
    """Row-major lattice of patch records for a K x K mask."""

    size: int
    patch_size: int
    dim: int
    patches: list = field(default_factory=list)

    def __post_init__(self):
        check_patch_size(self.size, self.patch_size)
        if not 1 <= self.dim <= self.patch_size ** 2:
            raise LengthError(f"patch dim must be in [1, {self.patch_size ** 2}], got {self.dim}")
        if len(self.patches) != self.num_all:
            raise ContractError(f"expected {self.num_all} patches, got {len(self.patches)}")
        for rec in self.patches:
            if rec.vector is not None and (
                rec.vector.resolution != self.patch_size or rec.vector.dim != self.dim
            ):
                raise ContractError("patch vector does not match grid patch size / dim")

    @property
    def per_side(self) -> int:
        return self.size // self.patch_size

    @property
    def num_all(self) -> int:
        return self.per_side ** 2

    @property
    def num_mixed(self) -> int:
        return sum(rec.cls is PatchClass.MIXED for rec in self.patches)

    def class_counts(self) -> dict:
        counts = {c: 0 for c in CLASS_ORDER}
        for rec in self.patches:
            counts[rec.cls] += 1
        return counts

    def window(self, index: int) -> tuple:
        """Pixel slices covered by patch ``index``."""
        r, c = divmod(index, self.per_side)
        m = self.patch_size
        return slice(r * m, (r + 1) * m), slice(c * m, (c + 1) * m)

    def replace(self, index: int, record: PatchRecord) -> "PatchGrid":
        patches = list(self.patches)
        patches[index] = record
        return PatchGrid(self.size, self.patch_size, self.dim, patches)

    def to_dict(self) -> dict:
        out = []
        for rec in self.patches:
            item = {"class": rec.cls.value}
            if rec.vector is not None:
                item["coeffs"] = rec.vector.coeffs.tolist()
            out.append(item)
        return {"K": self.size, "m": self.patch_size, "n": self.dim, "patches": out}

    @classmethod
    def from_dict(cls, data) -> "PatchGrid":
        try:
            size, m, n, raw = data["K"], data["m"], data["n"], data["patches"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"invalid patch grid document: {exc}") from None
        records = []
        for i, item in enumerate(raw):
            try:
                pc = PatchClass(item["class"])
            except (KeyError, ValueError, TypeError):
                raise ParseError("invalid patch class", f"patches[{i}]") from None
            vec = DctVector(m, item["coeffs"]) if "coeffs" in item else None
            records.append(PatchRecord(pc, vec))
        return cls(size, m, n, records)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PatchGrid":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
        return cls.from_dict(data)


def check_patch_size(size: int, patch_size: int) -> None:
    if patch_size < 1 or size < 1 or size % patch_size:
        raise ConfigError(f"patch size {patch_size} does not divide mask size {size}")


def partition(mask, m: int) -> list:
    """Split into (K/m)^2 non-overlapping m x m tiles, row-major."""
    arr = as_mask(mask)
    k = arr.shape[0]
    check_patch_size(k, m)
    g = k // m
    tiles = arr.reshape(g, m, g, m).swapaxes(1, 2).reshape(g * g, m, m)
    return list(tiles)


def tile(patches: Sequence, size: int) -> np.ndarray:
    """Inverse of :func:`partition`."""
    stack = np.asarray(patches)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ContractError(f"patches must be a stack of square tiles, got {stack.shape}")
    m = stack.shape[1]
    check_patch_size(size, m)
    g = size // m
    if stack.shape[0] != g * g:
        raise ContractError(f"expected {g * g} tiles, got {stack.shape[0]}")
    return stack.reshape(g, g, m, m).swapaxes(1, 2).reshape(size, size)


def classify_patch(patch) -> PatchClass:
    p = as_mask(patch, "patch")
    total = int(p.sum())
    if total == 0:
        return PatchClass.BACKGROUND
    if total == p.size:
        return PatchClass.FOREGROUND
    return PatchClass.MIXED


def patch_vector(patch, n: int) -> DctVector:
    """Zigzag-truncated DCT of any patch; no class check."""
    p = as_mask(patch, "patch")
    return DctVector(p.shape[0], zigzag_scan(dct2d(p), n))


def encode_patch(patch, n: int) -> DctVector:
    """Code a mixed patch; foreground/background patches are refused."""
    pc = classify_patch(patch)
    if pc is not PatchClass.MIXED:
        raise PatchClassError(f"only mixed patches are regressed, got {pc.value}")
    return patch_vector(patch, n)


def decode_patch(cls, vector: Optional[DctVector], m: int) -> np.ndarray:
    pc = PatchClass(cls)
    if (vector is not None) != (pc is PatchClass.MIXED):
        raise ContractError(f"vector presence does not match class {pc.value}")
    if pc is PatchClass.FOREGROUND:
        return np.ones((m, m), dtype=np.uint8)
    if pc is PatchClass.BACKGROUND:
        return np.zeros((m, m), dtype=np.uint8)
    if vector.resolution != m:
        raise ContractError(f"vector resolution {vector.resolution} != patch size {m}")
    return decode_mask(vector)


def encode_grid(mask, m: int = DEFAULT_PATCH_SIZE, n: int = DEFAULT_PATCH_DIM) -> PatchGrid:
    arr = as_mask(mask)
    records = []
    for p in partition(arr, m):
        pc = classify_patch(p)
        records.append(PatchRecord(pc, patch_vector(p, n) if pc is PatchClass.MIXED else None))
    return PatchGrid(arr.shape[0], m, n, records)


def assemble(grid: PatchGrid) -> np.ndarray:
    tiles = [decode_patch(rec.cls, rec.vector, grid.patch_size) for rec in grid.patches]
    return tile(tiles, grid.size)


def patch_round_trip(mask, m: int = DEFAULT_PATCH_SIZE, n: int = DEFAULT_PATCH_DIM) -> np.ndarray:
    return assemble(encode_grid(mask, m, n))


@dataclass
class CoefficientStats:
    """Per-class samples of the first ``dim`` zigzag coefficients of every patch."""

    patch_size: int
    dim: int
    samples: dict

    def count(self, cls) -> int:
        return int(self.samples[PatchClass(cls)].shape[0])

    def histograms(self, bins: int = 33) -> dict:
        """Histogram per class and coefficient position over [-m, m]."""
        m = self.patch_size
        edges = np.linspace(-m, m, bins + 1)
        out = {}
        for pc in CLASS_ORDER:
            vals = self.samples[pc]
            out[pc.value] = [np.histogram(vals[:, i], bins=edges)[0] for i in range(self.dim)]
        return {"edges": edges, "counts": out}

    def to_dict(self, bins: int = 33) -> dict:
        hist = self.histograms(bins)
        classes = {}
        for pc in CLASS_ORDER:
            vals = self.samples[pc]
            positions = []
            for i in range(self.dim):
                col = vals[:, i]
                positions.append(
                    {
                        "position": i,
                        "min": float(col.min()) if col.size else None,
                        "max": float(col.max()) if col.size else None,
                        "mean": float(col.mean()) if col.size else None,
                        "histogram": hist["counts"][pc.value][i].tolist(),
                    }
                )
            classes[pc.value] = {"count": int(vals.shape[0]), "positions": positions}
        return {
            "m": self.patch_size,
            "n": self.dim,
            "bin_edges": hist["edges"].tolist(),
            "classes": classes,
        }


def coefficient_stats(corpus: Iterable, m: int = DEFAULT_PATCH_SIZE, n: int = DEFAULT_PATCH_DIM) -> CoefficientStats:
    rows = {pc: [] for pc in CLASS_ORDER}
    seen = 0
    for mask in corpus:
        seen += 1
        for p in partition(mask, m):
            rows[classify_patch(p)].append(patch_vector(p, n).coeffs)
    if not seen:
        raise InputError("coefficient_stats needs a non-empty corpus")
    samples = {pc: np.array(v).reshape(-1, n) for pc, v in rows.items()}
    return CoefficientStats(m, n, samples)
