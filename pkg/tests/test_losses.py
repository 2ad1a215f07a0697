import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchdct.errors import ContractError, InputError, LengthError
from patchdct.losses import (
    LossWeights,
    grad_l_cls_patch,
    grad_l_dct_global,
    grad_l_dct_patch,
    grad_l_mask,
    l_cls_patch,
    l_dct_global,
    l_dct_patch,
    l_mask,
)
from patchdct.patches import PatchClass

FG, BG, MIXED = PatchClass.FOREGROUND, PatchClass.BACKGROUND, PatchClass.MIXED


def central_diff(f, x, h=1e-5):
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


def away_from_kinks(rng, shape, gap=1e-3):
    d = rng.normal(0, 1, shape)
    return np.where(np.abs(d) < gap, np.sign(d + 1e-12) * (gap + 0.1), d)


def test_global_examples():
    t = np.array([1.0, 2.0, 3.0])
    assert l_dct_global(t, t) == 0.0
    assert l_dct_global(t + 1, t) == 1.0
    assert l_dct_global([3.0, -1.0], [1.0, 1.0]) == 2.0
    with pytest.raises(LengthError):
        l_dct_global([1.0], [1.0, 2.0])


def test_cls_examples():
    classes = [FG, BG, MIXED, MIXED]
    onehot = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]], dtype=float)
    assert l_cls_patch(onehot, classes) == 0.0
    assert l_cls_patch(np.full((4, 3), 1 / 3), classes) == pytest.approx(math.log(3))
    zero_true = np.array([[0.0, 1.0, 0.0]])
    assert l_cls_patch(zero_true, [FG]) == pytest.approx(12 * math.log(10))
    with pytest.raises(ContractError):
        l_cls_patch(onehot, classes[:3])
    with pytest.raises(InputError):
        l_cls_patch(np.full((4, 3), 0.5), classes)


def test_patch_examples():
    t = np.random.default_rng(0).normal(size=(4, 6))
    assert l_dct_patch(t, t, [MIXED] * 4) == 0.0
    pred = t.copy()
    pred[1] += 5.0  # non-mixed patch
    classes = [MIXED, FG, MIXED, BG]
    assert l_dct_patch(pred, t, classes) == 0.0
    two = np.zeros((2, 7))
    assert l_dct_patch(two + 1.0, two, [MIXED, BG]) == 1.0
    assert l_dct_patch(two + 1.0, two, [FG, BG]) == 0.0


def test_mask_examples():
    assert l_mask(0.0, [(0.0, 0.0)]) == 0.0
    assert l_mask(0.5, [(0.2, 0.3)], LossWeights(1.0, (1.0,))) == 1.0
    base = l_mask(0.5, [(0.2, 0.3)], LossWeights(1.0, (1.0,)))
    doubled = l_mask(0.5, [(0.2, 0.3)], LossWeights(1.0, (2.0,)))
    assert doubled - base == pytest.approx(0.5, abs=0)
    with pytest.raises(ContractError):
        l_mask(0.5, [(0.2, 0.3), (0.1, 0.1)], LossWeights(1.0, (1.0,)))
    with pytest.raises(InputError):
        LossWeights(-1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 10), st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=4),
       st.floats(0, 5), st.floats(0, 5))
def test_mask_linear_in_weights(g, stages, lam0, scale):
    w = LossWeights(lam0, tuple(1.0 for _ in stages))
    w2 = LossWeights(lam0 * scale, tuple(1.0 for _ in stages))
    zero_stage = l_mask(0.0, stages, w)
    assert l_mask(g, stages, w2) - zero_stage == pytest.approx(scale * lam0 * g, abs=1e-9)


def test_global_gradient_fd():
    rng = np.random.default_rng(1)
    t = rng.normal(size=12)
    p = t + away_from_kinks(rng, 12)
    fd = central_diff(lambda x: l_dct_global(x, t), p)
    assert np.max(np.abs(fd - grad_l_dct_global(p, t))) < 1e-5


def test_cls_gradient_fd():
    rng = np.random.default_rng(2)
    probs = rng.dirichlet([2, 2, 2], size=5)
    classes = [FG, BG, MIXED, MIXED, FG]
    fd = central_diff(lambda x: l_cls_patch(x, classes, check_simplex=False), probs, h=1e-7)
    assert np.max(np.abs(fd - grad_l_cls_patch(probs, classes))) < 1e-5


def test_patch_gradient_fd_and_masking():
    rng = np.random.default_rng(3)
    classes = [MIXED, FG, MIXED, BG, MIXED, BG]
    t = rng.normal(size=(6, 6))
    p = t + away_from_kinks(rng, (6, 6))
    fd = central_diff(lambda x: l_dct_patch(x, t, classes), p)
    g = grad_l_dct_patch(p, t, classes)
    assert np.max(np.abs(fd - g)) < 1e-5
    non_mixed = [i for i, c in enumerate(classes) if c is not MIXED]
    assert np.all(fd[non_mixed] == 0.0)
    assert np.all(g[non_mixed] == 0.0)


def test_patch_no_mixed_is_zero():
    t = np.zeros((3, 4))
    assert l_dct_patch(t + 1, t, [FG, BG, FG]) == 0.0
    assert not grad_l_dct_patch(t + 1, t, [FG, BG, FG]).any()


def test_mask_gradient_fd():
    stages = [(0.3, 0.7), (0.2, 0.1)]
    w = LossWeights(0.5, (2.0, 3.0))
    (dg, dstages), (dl0, dls) = grad_l_mask(0.9, stages, w)
    h = 1e-6
    assert (l_mask(0.9 + h, stages, w) - l_mask(0.9 - h, stages, w)) / (2 * h) == pytest.approx(dg, abs=1e-5)
    bumped = [(0.3 + h, 0.7), stages[1]]
    lowered = [(0.3 - h, 0.7), stages[1]]
    assert (l_mask(0.9, bumped, w) - l_mask(0.9, lowered, w)) / (2 * h) == pytest.approx(dstages[0][0], abs=1e-5)
    wl = LossWeights(0.5 + h, (2.0, 3.0))
    wr = LossWeights(0.5 - h, (2.0, 3.0))
    assert (l_mask(0.9, stages, wl) - l_mask(0.9, stages, wr)) / (2 * h) == pytest.approx(dl0, abs=1e-5)
    assert dls == [pytest.approx(1.0), pytest.approx(0.3)]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2 ** 32 - 1))
def test_losses_nonnegative(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n), rng.normal(size=n)
    assert l_dct_global(a, b) >= 0
    probs = rng.dirichlet([1, 1, 1], size=n)
    classes = [(FG, BG, MIXED)[i] for i in rng.integers(0, 3, n)]
    assert l_cls_patch(probs, classes) >= 0
    assert l_dct_patch(rng.normal(size=(n, 3)), rng.normal(size=(n, 3)), classes) >= 0
