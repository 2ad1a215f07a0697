"""Mask-branch losses as pure evaluators with analytic (sub)gradients.

Regression terms use the L1 penalty.  At an L1 kink the subgradient 0 is
returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, InputError, LengthError
from .patches import CLASS_ORDER, PatchClass

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """``lambda0`` weights the global term, ``stages[s-1]`` weights stage s."""

    lambda0: float = 1.0
    stages: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(float(w) for w in self.stages))
        for w in (self.lambda0, *self.stages):
            if not (math.isfinite(w) and w >= 0):
                raise InputError(f"loss weights must be finite and non-negative, got {w}")


def _vectors(pred, target):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise LengthError(f"prediction shape {p.shape} != target shape {t.shape}")
    return p, t


def l_dct_global(pred, target) -> float:
    """Mean absolute error over the N global coefficients."""
    p, t = _vectors(pred, target)
    if p.ndim != 1 or p.size == 0:
        raise LengthError("global DCT loss expects two non-empty 1-D vectors")
    return float(np.mean(np.abs(p - t)))


def grad_l_dct_global(pred, target) -> np.ndarray:
    p, t = _vectors(pred, target)
    return np.sign(p - t) / p.size


def _class_index(target_classes) -> np.ndarray:
    col = {pc: i for i, pc in enumerate(CLASS_ORDER)}
    return np.array([col[PatchClass(c)] for c in target_classes], dtype=np.intp)


def _probs(pred, n_patches, check_simplex):
    p = np.asarray(pred, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] != n_patches or n_patches == 0:
        raise ContractError(f"expected ({n_patches}, 3) class probabilities, got {p.shape}")
    if check_simplex and (np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9)):
        raise InputError("class probability rows must be non-negative and sum to 1")
    return p


def l_cls_patch(pred_probs, target_classes, check_simplex: bool = True) -> float:
    """Three-way cross-entropy averaged over patches.

    Columns of ``pred_probs`` are ordered (fg, bg, mixed).
    """
    idx = _class_index(target_classes)
    p = _probs(pred_probs, idx.size, check_simplex)
    picked = np.maximum(p[np.arange(idx.size), idx], PROB_FLOOR)
    return float(np.mean(-np.log(picked)))


def grad_l_cls_patch(pred_probs, target_classes) -> np.ndarray:
    idx = _class_index(target_classes)
    p = _probs(pred_probs, idx.size, False)
    grad = np.zeros_like(p)
    rows = np.arange(idx.size)
    picked = p[rows, idx]
    live = picked > PROB_FLOOR
    grad[rows[live], idx[live]] = -1.0 / (picked[live] * idx.size)
    return grad


def _mixed_indicator(target_classes, n_patches) -> np.ndarray:
    ind = np.array([PatchClass(c) is PatchClass.MIXED for c in target_classes], dtype=np.float64)
    if ind.size != n_patches:
        raise ContractError(f"{ind.size} class labels for {n_patches} patches")
    return ind


def l_dct_patch(pred, target, target_classes) -> float:
    """Per-patch L1 regression averaged over mixed patches only; 0 if none are mixed."""
    p, t = _vectors(pred, target)
    if p.ndim != 2:
        raise ContractError("patch vectors must be shaped (patches, n)")
    ind = _mixed_indicator(target_classes, p.shape[0])
    n_mixed = ind.sum()
    if n_mixed == 0:
        return 0.0
    per_patch = np.mean(np.abs(p - t), axis=1)
    return float(np.sum(ind * per_patch) / n_mixed)


def grad_l_dct_patch(pred, target, target_classes) -> np.ndarray:
    p, t = _vectors(pred, target)
    ind = _mixed_indicator(target_classes, p.shape[0])
    n_mixed = ind.sum()
    if n_mixed == 0:
        return np.zeros_like(p)
    return ind[:, None] * np.sign(p - t) / (p.shape[1] * n_mixed)


def l_mask(global_loss: float, stage_losses: Sequence, weights: LossWeights = LossWeights()) -> float:
    """Weighted global term plus, per stage, classification + regression terms.

    ``stage_losses`` holds one ``(cls_loss, dct_loss)`` pair per stage.
    """
    stage_losses = list(stage_losses)
    if not stage_losses:
        raise ContractError("at least one refinement stage is required")
    if len(stage_losses) != len(weights.stages):
        raise ContractError(f"{len(stage_losses)} stage losses but {len(weights.stages)} stage weights")
    total = weights.lambda0 * global_loss
    for lam, (cls_loss, dct_loss) in zip(weights.stages, stage_losses):
        total += lam * (cls_loss + dct_loss)
    return float(total)


def grad_l_mask(global_loss: float, stage_losses: Sequence, weights: LossWeights = LossWeights()):
    """Partial derivatives w.r.t. the component losses, then w.r.t. the weights."""
    stage_losses = list(stage_losses)
    if len(stage_losses) != len(weights.stages):
        raise ContractError(f"{len(stage_losses)} stage losses but {len(weights.stages)} stage weights")
    d_components = (weights.lambda0, [(lam, lam) for lam in weights.stages])
    d_weights = (global_loss, [c + d for c, d in stage_losses])
    return d_components, d_weights
