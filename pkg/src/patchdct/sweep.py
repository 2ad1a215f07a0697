"""Configuration sweeps over a mask corpus, reported as CSV.

Rows are ordered by configuration; within a configuration, instances are
evaluated in parallel but reduced in index order, so the report does not
depend on the thread count.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .codec import DEFAULT_DIM
from .errors import ConfigError, InputError
from .ingest import parse_annotations, rasterize, synth_corpus
from .metrics import boundary_band, default_band, iou
from .refine import RefineConfig, global_reencode_baseline, oracle_refine

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "schema_version",
    "kind",
    "K",
    "N",
    "m",
    "n",
    "S",
    "flip_prob",
    "noise",
    "band",
    "seed",
    "count",
    "mean_iou",
    "mean_boundary_iou",
]
THREADS_ENV = "PATCHDCT_THREADS"


@dataclass
class SweepSpec:
    resolution: int = 112
    synthetic_seed: Optional[int] = 0
    synthetic_count: int = 100
    annotations: Optional[str] = None
    global_dims: list = field(default_factory=lambda: [DEFAULT_DIM])
    patch: list = field(default_factory=lambda: [(8, 6)])
    stages: list = field(default_factory=lambda: [1])
    flip_probs: list = field(default_factory=lambda: [0.0])
    noises: list = field(default_factory=lambda: [0.0])
    band: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        self.patch = [tuple(p) for p in self.patch]
        if not self.global_dims and not self.patch:
            raise ConfigError("sweep needs at least one global dim or patch configuration")
        if self.patch and not (self.stages and self.flip_probs and self.noises):
            raise ConfigError("stages, flip_probs and noises must be non-empty for patch configurations")
        if self.annotations is None and self.synthetic_seed is None:
            raise ConfigError("sweep needs a corpus: annotations file or synthetic seed")
        if self.annotations is not None and not Path(self.annotations).is_file():
            raise InputError(f"annotation file not found: {self.annotations}")
        k = self.resolution
        for n in self.global_dims:
            if not 1 <= n <= k * k:
                raise ConfigError(f"global dim {n} out of range for K={k}")
        for m, n in self.patch:
            if m < 1 or k % m:
                raise ConfigError(f"patch size {m} does not divide K={k}")
            if not 1 <= n <= m * m:
                raise ConfigError(f"patch dim {n} out of range for m={m}")
        for s in self.stages:
            if s < 1:
                raise ConfigError(f"stages must be >= 1, got {s}")
        for p in self.flip_probs:
            if not 0 <= p <= 1:
                raise ConfigError(f"flip probability {p} out of [0, 1]")
        for s in self.noises:
            if not (math.isfinite(s) and s >= 0):
                raise ConfigError(f"noise {s} must be finite and >= 0")
        if self.band is not None and self.band < 1:
            raise ConfigError(f"band must be >= 1, got {self.band}")

    @property
    def band_width(self) -> float:
        return self.band if self.band is not None else default_band(self.resolution)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {
            "resolution", "global_dims", "patch", "stages", "flip_probs", "noises", "band", "seed",
        }
        corpus = data.get("corpus", {"synthetic": {"seed": 0, "count": 100}})
        kwargs = {k: v for k, v in data.items() if k in known}
        if "annotations" in corpus:
            kwargs.update(annotations=corpus["annotations"], synthetic_seed=None)
        elif "synthetic" in corpus:
            syn = corpus["synthetic"]
            kwargs.update(synthetic_seed=syn.get("seed", 0), synthetic_count=syn.get("count", 100))
        else:
            raise ConfigError("corpus must name 'annotations' or 'synthetic'")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: {exc.msg} at line {exc.lineno}") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: sweep spec must be a JSON object")
        base = Path(path).parent
        corpus = data.get("corpus", {})
        if isinstance(corpus, dict) and "annotations" in corpus:
            corpus = dict(corpus, annotations=str(base / corpus["annotations"]))
            data = dict(data, corpus=corpus)
        return cls.from_dict(data)

    def corpus(self) -> list:
        if self.annotations is not None:
            parsed = parse_annotations(Path(self.annotations).read_text())
            if not parsed.records:
                raise InputError(f"{self.annotations}: no valid annotations")
            return [rasterize(r, self.resolution) for r in parsed.records]
        return synth_corpus(self.synthetic_seed, self.synthetic_count, self.resolution)

    def configurations(self) -> list:
        out = [("global", {"N": n}) for n in self.global_dims]
        for (m, n), s, p, sigma in itertools.product(self.patch, self.stages, self.flip_probs, self.noises):
            out.append(("patch", {"m": m, "n": n, "S": s, "flip_prob": p, "noise": sigma}))
        return out


def thread_count(requested: Optional[int] = None) -> int:
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise InputError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            requested = os.cpu_count() or 1
    return max(1, requested)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_sweep(spec: SweepSpec, threads: Optional[int] = None) -> list:
    """Evaluate every configuration; returns one dict per CSV row."""
    masks = spec.corpus()
    d = spec.band_width
    workers = thread_count(threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        truth_bands = list(pool.map(lambda t: boundary_band(t, d), masks))

        rows = []
        for kind, cfg in spec.configurations():
            if kind == "global":
                def run(i, n=cfg["N"]):
                    return global_reencode_baseline(masks[i], n)
            else:
                rc = RefineConfig(cfg["m"], cfg["n"], cfg["S"], cfg["flip_prob"], cfg["noise"], spec.seed)

                def run(i, rc=rc):
                    return oracle_refine(masks[i], masks[i], rc, instance=i)[0]

            def score(i, run=run):
                out = run(i)
                return iou(out, masks[i]), iou(boundary_band(out, d), truth_bands[i])

            scores = list(pool.map(score, range(len(masks))))
            rows.append(
                {
                    "schema_version": CSV_SCHEMA_VERSION,
                    "kind": kind,
                    "K": spec.resolution,
                    "N": cfg.get("N"),
                    "m": cfg.get("m"),
                    "n": cfg.get("n"),
                    "S": cfg.get("S"),
                    "flip_prob": float(cfg["flip_prob"]) if "flip_prob" in cfg else None,
                    "noise": float(cfg["noise"]) if "noise" in cfg else None,
                    "band": d,
                    "seed": spec.seed,
                    "count": len(masks),
                    "mean_iou": math.fsum(s[0] for s in scores) / len(scores),
                    "mean_boundary_iou": math.fsum(s[1] for s in scores) / len(scores),
                }
            )
    return rows


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(text: str) -> list:
    return list(csv.DictReader(io.StringIO(text)))
