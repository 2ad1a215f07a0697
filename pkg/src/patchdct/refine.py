"""Patch refinement stages driven by ground-truth oracles.

The classifier and regressor are replaced by the truth mask's own patch
classes and patch DCT vectors.  Two optional corruptions make sensitivity
measurable: class flips (probability ``flip_prob``, to a uniformly chosen
other class) and additive Gaussian noise on every regressed coefficient.

Each stage reads its targets from the truth mask, so without corruption the
coarse input has no influence on the output.  A patch flipped *to* mixed
still receives the truth patch's vector, which decodes to the same constant
tile for foreground/background truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .codec import DctVector, decode_mask, encode_mask
from .errors import ConfigError, InputError, LengthError
from .masks import as_mask
from .metrics import iou
from .patches import (
    CLASS_ORDER,
    DEFAULT_PATCH_DIM,
    DEFAULT_PATCH_SIZE,
    PatchClass,
    PatchGrid,
    PatchRecord,
    assemble,
    check_patch_size,
    classify_patch,
    partition,
    patch_vector,
)


@dataclass(frozen=True)
class RefineConfig:
    patch_size: int = DEFAULT_PATCH_SIZE
    dim: int = DEFAULT_PATCH_DIM
    stages: int = 1
    flip_prob: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.patch_size < 1:
            raise ConfigError(f"patch size must be >= 1, got {self.patch_size}")
        if not 1 <= self.dim <= self.patch_size ** 2:
            raise LengthError(f"patch dim must be in [1, {self.patch_size ** 2}], got {self.dim}")
        if self.stages < 1:
            raise ConfigError(f"stages must be >= 1, got {self.stages}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError(f"flip probability must be in [0, 1], got {self.flip_prob}")
        if not (np.isfinite(self.noise) and self.noise >= 0):
            raise ConfigError(f"noise must be finite and >= 0, got {self.noise}")

    @property
    def noiseless(self) -> bool:
        return self.flip_prob == 0.0 and self.noise == 0.0


def _mask_rows(mask) -> list:
    return ["".join("1" if v else "0" for v in row) for row in mask]


def _rows_mask(rows) -> np.ndarray:
    return np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8)


@dataclass
class StageRecord:
    stage: int
    input: np.ndarray
    grid: PatchGrid
    output: np.ndarray
    iou: float


@dataclass
class RefineTrace:
    truth: np.ndarray
    config: RefineConfig
    stages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "m": cfg.patch_size,
                "n": cfg.dim,
                "stages": cfg.stages,
                "flip_prob": cfg.flip_prob,
                "noise": cfg.noise,
                "seed": cfg.seed,
            },
            "K": int(self.truth.shape[0]),
            "truth": _mask_rows(self.truth),
            "stages": [
                {
                    "stage": s.stage,
                    "input": _mask_rows(s.input),
                    "grid": s.grid.to_dict(),
                    "output": _mask_rows(s.output),
                    "iou": s.iou,
                }
                for s in self.stages
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data) -> "RefineTrace":
        c = data["config"]
        cfg = RefineConfig(c["m"], c["n"], c["stages"], c["flip_prob"], c["noise"], c["seed"])
        trace = cls(_rows_mask(data["truth"]), cfg)
        for s in data["stages"]:
            trace.stages.append(
                StageRecord(
                    s["stage"],
                    _rows_mask(s["input"]),
                    PatchGrid.from_dict(s["grid"]),
                    _rows_mask(s["output"]),
                    s["iou"],
                )
            )
        return trace


def _stage_grid(truth_patches, truth_classes, size, cfg, rng) -> PatchGrid:
    count = len(truth_patches)
    # fixed draw count per stage keeps streams aligned across corruption levels
    u = rng.random(count)
    shift = rng.integers(1, 3, size=count)
    noise = rng.standard_normal((count, cfg.dim))
    records = []
    for k, (patch, pc) in enumerate(zip(truth_patches, truth_classes)):
        if u[k] < cfg.flip_prob:
            pc = CLASS_ORDER[(CLASS_ORDER.index(pc) + int(shift[k])) % 3]
        if pc is PatchClass.MIXED:
            coeffs = patch_vector(patch, cfg.dim).coeffs
            if cfg.noise > 0:
                coeffs = coeffs + cfg.noise * noise[k]
            records.append(PatchRecord(pc, DctVector(cfg.patch_size, coeffs)))
        else:
            records.append(PatchRecord(pc))
    return PatchGrid(size, cfg.patch_size, cfg.dim, records)


def oracle_refine(coarse, truth, cfg: RefineConfig = RefineConfig(), instance: int = 0):
    """Run ``cfg.stages`` oracle stages; returns (final mask, trace).

    Randomness comes from a stream keyed on (cfg.seed, instance).
    """
    coarse = as_mask(coarse, "coarse")
    truth = as_mask(truth, "truth")
    if coarse.shape != truth.shape:
        raise InputError(f"coarse {coarse.shape} and truth {truth.shape} sizes differ")
    size = truth.shape[0]
    check_patch_size(size, cfg.patch_size)
    rng = np.random.default_rng([cfg.seed, instance])
    patches = partition(truth, cfg.patch_size)
    classes = [classify_patch(p) for p in patches]

    trace = RefineTrace(truth, cfg)
    current = coarse
    for s in range(1, cfg.stages + 1):
        grid = _stage_grid(patches, classes, size, cfg, rng)
        out = assemble(grid)
        trace.stages.append(StageRecord(s, current, grid, out, iou(out, truth)))
        current = out
    return current, trace


def oracle_idempotence_check(truth, cfg: RefineConfig = RefineConfig()) -> bool:
    """True iff a second noiseless stage reproduces the first stage's output."""
    if not cfg.noiseless:
        raise ConfigError("idempotence is only defined for the noiseless oracle")
    truth = as_mask(truth, "truth")
    two = RefineConfig(cfg.patch_size, cfg.dim, 2, 0.0, 0.0, cfg.seed)
    _, trace = oracle_refine(np.zeros_like(truth), truth, two)
    return bool(np.array_equal(trace.stages[0].output, trace.stages[1].output))


def global_reencode_baseline(truth, n: int) -> np.ndarray:
    """Oracle version of re-regressing a single global vector."""
    return decode_mask(encode_mask(truth, n))
