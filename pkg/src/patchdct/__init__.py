"""Patch-wise DCT mask coding, oracle refinement, losses and boundary metrics."""

from .codec import DctVector, decode_mask, encode_mask, reconstruction_error
from .dct import dct2d, dct2d_naive, idct2d, zigzag_order, zigzag_scan, zigzag_unscan
from .metrics import EvalReport, EvalRow, aggregate, boundary_band, boundary_iou, iou
from .patches import (
    PatchClass,
    PatchGrid,
    PatchRecord,
    assemble,
    classify_patch,
    coefficient_stats,
    decode_patch,
    encode_grid,
    encode_patch,
    partition,
)
from .refine import RefineConfig, RefineTrace, global_reencode_baseline, oracle_idempotence_check, oracle_refine

__version__ = "0.1.0"
