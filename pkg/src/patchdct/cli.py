"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .codec import DEFAULT_DIM, DctVector, decode_mask, encode_mask
from .errors import InputError, PatchDCTError
from .ingest import corpus_manifest, resize_mask, synth_corpus
from .masks import as_mask
from .metrics import aggregate, confusion, default_band, evaluate_pair
from .patches import PatchGrid, assemble, coefficient_stats, encode_grid
from .pnm import format_pbm, format_ppm, read_pbm
from .refine import RefineConfig, oracle_refine
from .sweep import SweepSpec, format_csv, run_sweep

log = logging.getLogger("patchdct")

# overlay palette
COLOR_TN = (0, 0, 0)
COLOR_TP = (255, 255, 255)
COLOR_FP = (255, 0, 0)
COLOR_FN = (0, 0, 255)


class InvariantViolation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def write_atomic(path, data) -> None:
    """Write bytes or text via a temporary file so no partial output is left behind."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_mask(path, resolution=None) -> np.ndarray:
    mask = as_mask(read_pbm(path), str(path))
    if resolution is not None and mask.shape[0] != resolution:
        mask = resize_mask(mask, resolution)
    return mask


def _mask_files(items) -> list:
    files = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(p.glob("*.pbm")))
        else:
            files.append(p)
    return files


def cmd_encode(args) -> int:
    mask = _load_mask(args.input, args.resolution)
    if args.patch_size is not None:
        grid = encode_grid(mask, args.patch_size, args.patch_dim)
        payload = grid.to_json()
    else:
        payload = encode_mask(mask, args.dim).to_json()
    write_atomic(args.out, payload + "\n")
    return 0


def cmd_decode(args) -> int:
    try:
        data = json.loads(Path(args.input).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.input}: {exc.msg} at line {exc.lineno}") from None
    if isinstance(data, dict) and "patches" in data:
        mask = assemble(PatchGrid.from_dict(data))
    else:
        mask = decode_mask(DctVector.from_dict(data))
    write_atomic(args.out, format_pbm(mask, ascii=args.ascii))
    return 0


def cmd_refine(args) -> int:
    truth = _load_mask(args.truth, args.resolution)
    coarse = _load_mask(args.coarse, truth.shape[0]) if args.coarse else np.zeros_like(truth)
    cfg = RefineConfig(args.patch_size, args.patch_dim, args.stages, args.flip_prob, args.noise, args.seed)
    out, trace = oracle_refine(coarse, truth, cfg)
    write_atomic(args.out, format_pbm(out, ascii=args.ascii))
    if args.trace:
        write_atomic(args.trace, trace.to_json() + "\n")
    for s in trace.stages:
        print(f"stage {s.stage}: iou={s.iou:.6f} mixed={s.grid.num_mixed}/{s.grid.num_all}")
    return 0


def _sweep_spec(args) -> SweepSpec:
    if args.spec:
        spec = SweepSpec.load(args.spec)
    else:
        patch = [(args.patch_size, args.patch_dim)] if args.patch_size else []
        spec = SweepSpec(
            resolution=args.resolution or 112,
            synthetic_seed=args.corpus_seed,
            synthetic_count=args.count,
            global_dims=[args.dim] if args.dim else [],
            patch=patch,
            stages=[args.stages],
            flip_probs=[args.flip_prob],
            noises=[args.noise],
            band=args.band,
            seed=args.seed,
        )
    return spec


def cmd_sweep(args) -> int:
    spec = _sweep_spec(args)
    rows = run_sweep(spec)
    for r in rows:
        for key in ("mean_iou", "mean_boundary_iou"):
            if not 0.0 <= r[key] <= 1.0:
                raise InvariantViolation(f"{key}={r[key]} outside [0, 1]")
    text = format_csv(rows)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    preds, truths = _mask_files(args.pred), _mask_files(args.truth)
    if not preds or not truths:
        raise InputError("eval needs at least one prediction and one ground-truth mask")
    if len(preds) != len(truths):
        raise InputError(f"unpaired inputs: {len(preds)} predictions vs {len(truths)} ground truths")
    rows = []
    band = args.band
    for p, t in zip(preds, truths):
        pm, tm = _load_mask(p), _load_mask(t)
        if pm.shape != tm.shape:
            raise InputError(f"{p} and {t} differ in size")
        d = band if band is not None else default_band(tm.shape[0])
        rows.append(evaluate_pair(p.name, pm, tm, d))
    key = {"band": band if band is not None else "default"}
    report = aggregate(rows, key)
    out = Path(args.out)
    write_atomic(out.with_suffix(".json"), report.to_json())
    write_atomic(out.with_suffix(".csv"), report.to_csv())
    print(f"count={report.count} mean_iou={report.mean_iou:.6f} mean_boundary_iou={report.mean_boundary_iou:.6f}")
    return 0


def _corpus_from_args(args) -> list:
    if args.masks:
        files = _mask_files(args.masks)
        if not files:
            raise InputError("no mask files found")
        return [_load_mask(f, args.resolution) for f in files]
    return synth_corpus(args.seed, args.count, args.resolution or 112)


def cmd_stats(args) -> int:
    stats = coefficient_stats(_corpus_from_args(args), args.patch_size, args.patch_dim)
    text = json.dumps(stats.to_dict(bins=args.bins), indent=1) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    size = args.resolution or 112
    masks = synth_corpus(args.seed, args.count, size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.count - 1)))
    for i, m in enumerate(masks):
        write_atomic(out / f"mask_{i:0{width}d}.pbm", format_pbm(m, ascii=args.ascii))
    manifest = corpus_manifest(args.seed, args.count, size, masks)
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    return 0


def overlay_image(mask, truth) -> np.ndarray:
    p = as_mask(mask, "mask", square=False).astype(bool)
    t = as_mask(truth, "truth", square=False).astype(bool)
    if p.shape != t.shape:
        raise InputError(f"mask {p.shape} and truth {t.shape} sizes differ")
    img = np.zeros(p.shape + (3,), dtype=np.uint8)
    img[p & t] = COLOR_TP
    img[p & ~t] = COLOR_FP
    img[~p & t] = COLOR_FN
    return img


def cmd_overlay(args) -> int:
    mask, truth = _load_mask(args.mask), _load_mask(args.truth)
    img = overlay_image(mask, truth)
    counts = confusion(mask, truth)
    n_tp = int(np.all(img == COLOR_TP, axis=2).sum())
    if n_tp != counts["tp"]:
        raise InvariantViolation("overlay colour counts disagree with confusion counts")
    write_atomic(args.out, format_ppm(img))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchdct", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def refine_flags(p):
        p.add_argument("--patch-size", type=int, default=8)
        p.add_argument("--patch-dim", type=int, default=6)
        p.add_argument("--stages", type=int, default=1)
        p.add_argument("--flip-prob", type=float, default=0.0)
        p.add_argument("--noise", type=float, default=0.0)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("encode", help="PBM mask -> encoded JSON (global vector or patch grid)")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int)
    p.add_argument("--dim", type=int, default=DEFAULT_DIM)
    p.add_argument("--patch-size", type=int, help="emit a patch grid instead of a global vector")
    p.add_argument("--patch-dim", type=int, default=6)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="encoded JSON -> PBM mask")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--ascii", action="store_true", help="write P1 instead of P4")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("refine", help="oracle patch refinement of one mask")
    p.add_argument("--truth", required=True)
    p.add_argument("--coarse")
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--resolution", type=int)
    p.add_argument("--ascii", action="store_true")
    refine_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("sweep", help="corpus sweep to CSV")
    p.add_argument("--spec", help="sweep spec JSON; overrides the single-config flags")
    p.add_argument("--resolution", type=int)
    p.add_argument("--dim", type=int, help="global vector length (omit for none)")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--corpus-seed", type=int, default=0)
    p.add_argument("--band", type=float)
    p.add_argument("--out")
    refine_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="IoU / boundary IoU report for paired masks")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--truth", nargs="+", required=True)
    p.add_argument("--band", type=float)
    p.add_argument("--out", required=True, help="output prefix; writes .json and .csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="per-class patch coefficient histograms")
    p.add_argument("masks", nargs="*")
    p.add_argument("--resolution", type=int)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--patch-dim", type=int, default=6)
    p.add_argument("--bins", type=int, default=33)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--resolution", type=int)
    p.add_argument("--ascii", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("overlay", help="colour TP/FP/FN pixels into a PPM")
    p.add_argument("mask")
    p.add_argument("truth")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (PatchDCTError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
