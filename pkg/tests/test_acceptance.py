"""Exit criteria. A PASS/FAIL line per criterion is printed in the terminal summary."""

import json
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from patchdct.cli import main
from patchdct.codec import DctVector, decode_mask, encode_mask
from patchdct.dct import dct2d, dct2d_naive
from patchdct.ingest import dump_annotations, parse_annotations, rasterize, synth_corpus
from patchdct.losses import (
    LossWeights,
    grad_l_dct_patch,
    l_cls_patch,
    l_dct_global,
    l_dct_patch,
    l_mask,
)
from patchdct.metrics import boundary_band, boundary_iou, iou
from patchdct.patches import PatchClass, PatchRecord, assemble, encode_grid
from patchdct.pnm import format_pbm
from patchdct.refine import RefineConfig, global_reencode_baseline, oracle_idempotence_check, oracle_refine

from .oracles import band_brute

GOLDEN = Path(__file__).parent / "golden" / "reference_sweep.csv"
MIXED = PatchClass.MIXED


def crit(n, title):
    return pytest.mark.criterion(n, title)


@crit(1, "transform exactness")
def test_c1_transform_exactness():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    sizes = [8, 16, 28, 64, 112, 128]
    worst_naive = 0.0
    for i in range(1000):
        k = sizes[i % len(sizes)]
        mask = (rng.random((k, k)) < rng.uniform(0.05, 0.95)).astype(np.uint8)
        assert np.array_equal(decode_mask(encode_mask(mask, k * k)), mask), f"mask {i} (K={k})"
        if k <= 16:
            worst_naive = max(worst_naive, float(np.max(np.abs(dct2d(mask) - dct2d_naive(mask)))))
    elapsed = time.perf_counter() - start
    assert worst_naive < 1e-9
    assert elapsed < 30.0, f"took {elapsed:.1f}s"


@crit(2, "foreground-patch coefficient theorem")
@pytest.mark.parametrize("m", [2, 4, 8, 16, 32])
def test_c2_foreground_theorem(m):
    f = dct2d(np.ones((m, m)))
    assert abs(f[0, 0] - m) < 1e-9
    rest = f.copy()
    rest[0, 0] = 0.0
    assert np.max(np.abs(rest)) < 1e-9
    assert np.all(dct2d(np.zeros((m, m))) == 0.0)


@crit(3, "locality: patch edits stay local, global edits do not")
def test_c3_locality(corpus112):
    rng = np.random.default_rng(33)
    for mask in corpus112:
        grid = encode_grid(mask, 8, 6)
        mixed = [i for i, r in enumerate(grid.patches) if r.cls is MIXED]
        k = int(rng.choice(mixed))
        coeffs = grid.patches[k].vector.coeffs.copy()
        coeffs[int(rng.integers(0, 6))] += float(rng.choice([-1, 1]) * rng.uniform(1, 8))
        edited = assemble(grid.replace(k, PatchRecord(MIXED, DctVector(8, coeffs))))
        diff = edited != assemble(grid)
        rows, cols = grid.window(k)
        diff[rows, cols] = False
        assert not diff.any()

    non_local = 0
    for mask in corpus112:
        v = encode_mask(mask, 300)
        coeffs = v.coeffs.copy()
        coeffs[int(rng.integers(1, 300))] += 20.0
        changed = np.argwhere(decode_mask(DctVector(112, coeffs)) != decode_mask(v))
        if changed.size:
            span = changed.max(axis=0) - changed.min(axis=0)
            if span.max() >= 8:
                non_local += 1
    assert non_local >= 1


@pytest.fixture(scope="module")
def dim_sweep_means(corpus112):
    start = time.perf_counter()
    patch = {}
    for n in (3, 6, 9, 12):
        cfg = RefineConfig(8, n)
        patch[n] = np.mean([iou(oracle_refine(t, t, cfg, i)[0], t) for i, t in enumerate(corpus112)])
    glob = np.mean([iou(global_reencode_baseline(t, 300), t) for t in corpus112])
    return patch, glob, time.perf_counter() - start


@crit(4, "patch-dimension trend: n=3 < 6 <= 9 <= 12 (slack 0.002)")
def test_c4_patch_dim_trend(dim_sweep_means):
    patch, _, elapsed = dim_sweep_means
    slack = 0.002
    assert patch[3] < patch[6]
    assert patch[6] <= patch[9] + slack
    assert patch[9] <= patch[12] + slack
    assert elapsed < 60.0


@crit(4, "patch n=6 mean IoU >= global N=300")
def test_c4_patch_vs_global(dim_sweep_means):
    patch, glob, _ = dim_sweep_means
    assert patch[6] >= glob, f"patch n=6 mean IoU {patch[6]:.5f} < global N=300 {glob:.5f}"


@crit(5, "mixed-patch masking of the patch regression loss")
def test_c5_masking_gradient():
    rng = np.random.default_rng(5)
    classes = [(PatchClass.FOREGROUND, PatchClass.BACKGROUND, MIXED)[c] for c in rng.integers(0, 3, 30)]
    classes[0] = MIXED
    target = rng.normal(size=(30, 6))
    err = rng.normal(size=(30, 6))
    err = np.where(np.abs(err) < 1e-3, 0.5, err)
    pred = target + err
    h = 1e-5
    analytic = grad_l_dct_patch(pred, target, classes)
    for idx in np.ndindex(pred.shape):
        up, dn = pred.copy(), pred.copy()
        up[idx] += h
        dn[idx] -= h
        fd = (l_dct_patch(up, target, classes) - l_dct_patch(dn, target, classes)) / (2 * h)
        if classes[idx[0]] is MIXED:
            assert abs(fd - analytic[idx]) < 1e-5
        else:
            assert abs(fd) < 1e-9 and analytic[idx] == 0.0


@crit(6, "loss identities")
def test_c6_loss_identities():
    rng = np.random.default_rng(6)
    v = rng.normal(size=300)
    assert l_dct_global(v, v) == 0.0
    classes = [PatchClass.FOREGROUND, PatchClass.BACKGROUND, MIXED]
    assert l_cls_patch(np.eye(3), classes) == 0.0
    pv = rng.normal(size=(3, 6))
    assert l_dct_patch(pv, pv, classes) == 0.0
    g, c, d = 0.37, 0.21, 0.58
    assert l_mask(g, [(c, d)], LossWeights(1.0, (1.0,))) == g + (c + d)


@crit(7, "boundary IoU against brute force")
def test_c7_boundary_oracle():
    rng = np.random.default_rng(7)
    for i in range(200):
        k = int(rng.integers(1, 33))
        mask = (rng.random((k, k)) < rng.uniform(0.2, 0.95)).astype(np.uint8)
        d = float(rng.choice([1, 1.5, 2, 3, 4.5]))
        assert np.array_equal(boundary_band(mask, d), band_brute(mask, d)), f"instance {i}"
        other = (rng.random((k, k)) < 0.5).astype(np.uint8)
        assert boundary_iou(mask, mask, d) == 1.0
        assert boundary_iou(mask, other, k) == iou(mask, other)


@crit(8, "oracle refinement")
def test_c8_oracle_refinement(corpus112):
    exact = RefineConfig(8, 64)
    coarse = np.zeros((112, 112), np.uint8)
    for t in corpus112:
        assert np.array_equal(oracle_refine(coarse, t, exact)[0], t)
    assert all(oracle_idempotence_check(t, RefineConfig(8, 6)) for t in corpus112)
    means = []
    for eps in (0.0, 0.05, 0.1):
        cfg = RefineConfig(8, 6, flip_prob=eps, seed=0)
        means.append(np.mean([iou(oracle_refine(t, t, cfg, i)[0], t) for i, t in enumerate(corpus112)]))
    assert means[0] >= means[1] >= means[2], means


@crit(9, "ingest round trip and rasterization")
def test_c9_ingest():
    doc = {"annotations": [
        {"id": 1, "bbox": [10, 20, 30, 40], "category_id": 1, "segmentation": [[10, 20, 40, 20, 40, 60, 10, 60]]},
        {"id": 2, "bbox": [0, 0, 6, 4], "category_id": 2, "segmentation": {"counts": [0, 24], "size": [4, 6]}},
        {"id": 3, "bbox": [5, 5, 50, 30], "segmentation": [[5, 5, 55, 5, 5, 35], [20, 20, 30, 20, 25, 30]]},
    ]}
    first = parse_annotations(json.dumps(doc)).records
    assert parse_annotations(dump_annotations(first)).records == first
    assert rasterize(first[0], 112).all()
    assert rasterize(first[1], 112).all()
    assert np.array_equal(rasterize(first[2], 64), rasterize(first[2], 64))
    a = b"".join(format_pbm(m) for m in synth_corpus(11, 100, 112))
    b = b"".join(format_pbm(m) for m in synth_corpus(11, 100, 112))
    assert a == b


@crit(10, "sweep CSV golden and thread-count invariant")
def test_c10_sweep_golden(tmp_path, monkeypatch):
    spec = resources.files("patchdct") / "data" / "reference_sweep.json"
    outputs = []
    for threads in ("1", "4", "1"):
        monkeypatch.setenv("PATCHDCT_THREADS", threads)
        out = tmp_path / f"sweep_{len(outputs)}.csv"
        assert main(["sweep", "--spec", str(spec), "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert outputs[0] == GOLDEN.read_bytes()
