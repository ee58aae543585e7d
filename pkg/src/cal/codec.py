"""Scalar slide-bar encoding, look-up-table decoding and binary image ingestion."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .bitvec import SparseBitVector

__all__ = [
    "NoPrediction",
    "EncoderSpec",
    "make_encoder",
    "char_encoder",
    "encode",
    "decode",
    "decode_table",
    "ingest_frame",
    "read_pbm",
    "write_pbm",
    "write_pgm",
]


class NoPrediction(ValueError):
    """Raised when a vector carries no active bits to decode."""


@dataclass(frozen=True)
class EncoderSpec:
    s_min: float
    s_max: float
    r: float
    k: int
    d: int
    kind: str
    N: int = field(init=False)
    bins: int = field(init=False)

    def __post_init__(self):
        if self.kind not in ("real", "integer"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if not self.s_max > self.s_min:
            raise ValueError("s_max must exceed s_min")
        if not self.r > 0:
            raise ValueError(f"resolution must be positive, got {self.r}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        steps = (self.s_max - self.s_min) / self.r
        nsteps = int(round(steps))
        if self.kind == "integer":
            if self.r != 1 or self.d != self.k:
                raise ValueError("integer encoders require r = 1 and d = k")
            if nsteps != steps:
                raise ValueError("integer range must span a whole number of bins")
        elif not 1 <= self.d <= self.k:
            raise ValueError(f"displacement must lie in [1, k], got {self.d}")
        object.__setattr__(self, "bins", nsteps + 1)
        object.__setattr__(self, "N", self.d * nsteps + self.k)

    def bin_of(self, s: float) -> int:
        b = int(np.floor((s - self.s_min) / self.r + 0.5))
        if not 0 <= b < self.bins or not (self.s_min - self.r / 2 <= s <= self.s_max + self.r / 2):
            raise ValueError(f"value {s} outside encoder range [{self.s_min}, {self.s_max}]")
        return b

    def value_of(self, b: int) -> float:
        return b * self.r + self.s_min


def make_encoder(s_min: float, s_max: float, r: float, k: int, kind: str = "real", d: int | None = None) -> EncoderSpec:
    """Build an encoder; ``d`` defaults to ``k`` for integers and 1 for reals."""
    if d is None:
        d = k if kind == "integer" else 1
    return EncoderSpec(float(s_min), float(s_max), float(r), int(k), int(d), kind)


def char_encoder(text: str, k: int = 5) -> EncoderSpec:
    """Integer encoder covering the character codes present in ``text``."""
    codes = [ord(c) for c in text]
    return make_encoder(min(codes), max(codes), 1, k, "integer")


def encode(spec: EncoderSpec, s: float) -> SparseBitVector:
    b = spec.bin_of(s)
    start = b * spec.d
    return SparseBitVector._trusted(np.arange(start, start + spec.k, dtype=np.int64), spec.N)


def bin_overlaps(spec: EncoderSpec, x: SparseBitVector) -> np.ndarray:
    """Overlap of ``x`` with every bin's encoding."""
    csum = np.concatenate(([0], np.cumsum(x.to_mask(), dtype=np.int64)))
    starts = np.arange(spec.bins) * spec.d
    return csum[starts + spec.k] - csum[starts]


def decode(spec: EncoderSpec, x: SparseBitVector) -> float:
    """Value of the best-matching bin; ties go to the lowest bin."""
    if x.length != spec.N:
        raise ValueError(f"vector length {x.length} != encoder width {spec.N}")
    if x.cardinality == 0:
        raise NoPrediction("nothing to decode")
    return spec.value_of(int(np.argmax(bin_overlaps(spec, x))))


def decode_table(spec: EncoderSpec) -> sp.csc_matrix:
    """N x bins binary matrix whose column b is the encoding of bin b."""
    cols = np.repeat(np.arange(spec.bins), spec.k)
    rows = (cols * spec.d + np.tile(np.arange(spec.k), spec.bins))
    data = np.ones(rows.size, dtype=np.int32)
    return sp.csc_matrix((data, (rows, cols)), shape=(spec.N, spec.bins))


def ingest_frame(image: np.ndarray) -> SparseBitVector:
    """Unwrap a binary image column-major: pixel (i, j) -> j * rows + i."""
    image = np.asarray(image)
    if image.ndim != 2 or min(image.shape) < 1:
        raise ValueError("expected a non-empty 2D image")
    return SparseBitVector(np.flatnonzero(image.ravel(order="F")), image.size)


def read_pbm(path: str | Path) -> np.ndarray:
    """Read a plain (P1) portable bitmap as a boolean array."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not a plain PBM (P1) file")
    width, height = int(tokens[1]), int(tokens[2])
    # P1 pixel digits may be packed without whitespace
    digits = "".join(tokens[3:])
    if len(digits) != width * height or set(digits) - {"0", "1"}:
        raise ValueError(f"{path}: expected {width * height} pixels")
    return (np.frombuffer(digits.encode(), dtype=np.uint8) - ord("0")).reshape(height, width).astype(bool)


def write_pbm(path: str | Path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=bool)
    rows = [" ".join("1" if p else "0" for p in row) for row in image]
    Path(path).write_text(f"P1\n{image.shape[1]} {image.shape[0]}\n" + "\n".join(rows) + "\n")


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """Write a plain (P2) graymap, scaling values linearly onto 0..255."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min(initial=0.0)), float(values.max(initial=0.0))
    scaled = np.zeros(values.shape, dtype=np.int64) if hi == lo else np.rint(255 * (values - lo) / (hi - lo)).astype(np.int64)
    rows = [" ".join(map(str, row)) for row in scaled]
    Path(path).write_text(f"P2\n{values.shape[1]} {values.shape[0]}\n255\n" + "\n".join(rows) + "\n")
