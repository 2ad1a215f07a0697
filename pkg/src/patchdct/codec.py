"""Global DCT mask coding: K x K binary mask <-> top-N zigzag coefficients."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dct import dct2d, idct2d, zigzag_scan, zigzag_unscan
from .errors import InputError, LengthError, ParseError
from .masks import as_mask, binarize
from .metrics import iou

DEFAULT_RESOLUTION = 128
DEFAULT_DIM = 300


@dataclass(frozen=True, eq=False)
class DctVector:
    """Truncated zigzag coefficients of a ``resolution`` x ``resolution`` mask."""

    resolution: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        if self.resolution < 1:
            raise InputError(f"resolution must be >= 1, got {self.resolution}")
        if not 1 <= coeffs.size <= self.resolution ** 2:
            raise LengthError(
                f"vector length must be in [1, {self.resolution ** 2}], got {coeffs.size}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise InputError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return int(self.coeffs.size)

    def __eq__(self, other):
        if not isinstance(other, DctVector):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.coeffs, other.coeffs)

    def to_dict(self) -> dict:
        return {"resolution": self.resolution, "dim": self.dim, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, data) -> "DctVector":
        if not isinstance(data, dict):
            raise ParseError("encoded mask must be a JSON object")
        try:
            resolution = data["resolution"]
            coeffs = data["coeffs"]
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}") from None
        if not isinstance(resolution, int) or isinstance(resolution, bool):
            raise ParseError("'resolution' must be an integer", "resolution")
        if not isinstance(coeffs, list) or not all(
            isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs
        ):
            raise ParseError("'coeffs' must be a list of numbers", "coeffs")
        if "dim" in data and data["dim"] != len(coeffs):
            raise ParseError(f"'dim' is {data['dim']} but {len(coeffs)} coefficients given", "dim")
        return cls(resolution, np.array(coeffs, dtype=np.float64))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DctVector":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
        return cls.from_dict(data)


def encode_mask(mask, n: int) -> DctVector:
    m = as_mask(mask)
    return DctVector(m.shape[0], zigzag_scan(dct2d(m), n))


def reconstruct(v: DctVector) -> np.ndarray:
    """Real-valued inverse transform, before thresholding."""
    return idct2d(zigzag_unscan(v.coeffs, v.resolution))


def decode_mask(v: DctVector) -> np.ndarray:
    return binarize(reconstruct(v))


def round_trip(mask, n: int) -> np.ndarray:
    return decode_mask(encode_mask(mask, n))


def reconstruction_error(mask, n: int) -> float:
    """IoU between a mask and its N-coefficient reconstruction."""
    return iou(mask, round_trip(mask, n))
