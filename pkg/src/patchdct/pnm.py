"""Minimal PBM (P1/P4) reader/writer and PPM (P6) writer.

PBM stores 1 for black; masks map foreground to 1 directly.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import ParseError
from .masks import as_mask

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        self.pos = _TOKEN.match(self.data, self.pos).end()

    def token(self) -> bytes:
        self.skip_space()
        start = self.pos
        while self.pos < len(self.data) and not self.data[self.pos:self.pos + 1].isspace() \
                and self.data[self.pos:self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            raise ParseError("unexpected end of PBM header", f"byte {start}")
        return self.data[start:self.pos]

    def integer(self, what: str) -> int:
        tok = self.token()
        if not tok.isdigit():
            raise ParseError(f"expected {what}, got {tok[:16]!r}", f"byte {self.pos - len(tok)}")
        return int(tok)


def parse_pbm(data: bytes) -> np.ndarray:
    r = _Reader(data)
    magic = r.token()
    if magic not in (b"P1", b"P4"):
        raise ParseError(f"not a PBM file (magic {magic[:4]!r})", "byte 0")
    width = r.integer("width")
    height = r.integer("height")
    if width < 1 or height < 1:
        raise ParseError("PBM dimensions must be positive", "header")
    if magic == b"P4":
        r.pos += 1  # single whitespace byte after the header
        row_bytes = (width + 7) // 8
        raw = data[r.pos:r.pos + row_bytes * height]
        if len(raw) < row_bytes * height:
            raise ParseError("truncated P4 raster", f"byte {r.pos + len(raw)}")
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8).reshape(height, row_bytes), axis=1)
        return bits[:, :width].astype(np.uint8)
    body = re.sub(rb"#[^\n]*", b"", data[r.pos:])
    digits = bytes(c for c in body if not chr(c).isspace())
    if len(digits) < width * height or any(c not in b"01" for c in digits[:width * height]):
        raise ParseError("P1 raster must contain width*height 0/1 digits", "raster")
    return (np.frombuffer(digits[:width * height], dtype=np.uint8) - ord("0")).reshape(height, width)


def format_pbm(mask, ascii: bool = False) -> bytes:
    m = as_mask(mask, square=False)
    h, w = m.shape
    if ascii:
        lines = [f"P1\n{w} {h}\n".encode()]
        for row in m:
            lines.append(" ".join(str(int(v)) for v in row).encode() + b"\n")
        return b"".join(lines)
    return f"P4\n{w} {h}\n".encode() + np.packbits(m, axis=1).tobytes()


def read_pbm(path) -> np.ndarray:
    try:
        return parse_pbm(Path(path).read_bytes())
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_pbm(path, mask, ascii: bool = False) -> None:
    Path(path).write_bytes(format_pbm(mask, ascii))


def format_ppm(rgb: np.ndarray) -> bytes:
    arr = np.asarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {arr.shape}")
    h, w, _ = arr.shape
    return f"P6\n{w} {h}\n255\n".encode() + arr.tobytes()


def parse_ppm(data: bytes) -> np.ndarray:
    r = _Reader(data)
    if r.token() != b"P6":
        raise ParseError("not a binary PPM", "byte 0")
    w, h, maxval = r.integer("width"), r.integer("height"), r.integer("maxval")
    if maxval != 255:
        raise ParseError("only maxval 255 is supported", "header")
    r.pos += 1
    return np.frombuffer(data[r.pos:r.pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)
