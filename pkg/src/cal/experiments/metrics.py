"""Metric helpers and CSV output for experiment runs."""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..bitvec import SparseBitVector, jaccard
from ..codec import EncoderSpec, encode, write_pgm

__all__ = [
    "RMS_WINDOW",
    "MetricsRow",
    "RunningRMS",
    "RunningMean",
    "write_metrics",
    "write_matrix_csv",
    "similarity_matrix",
    "lissajous_support",
    "fmt",
    "write_matrix_pgm",
]

RMS_WINDOW = 50


def fmt(v) -> str:
    """Stable text form for CSV cells: empty for missing, 9 significant digits for reals."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.9g}"


class RunningRMS:
    """RMS of the most recent ``window`` errors; missing errors are skipped."""

    def __init__(self, window: int = RMS_WINDOW):
        self.buf: deque[float] = deque(maxlen=window)

    def push(self, err: float | None) -> float | None:
        if err is not None and not math.isnan(err):
            self.buf.append(err * err)
        return math.sqrt(sum(self.buf) / len(self.buf)) if self.buf else None


class RunningMean:
    def __init__(self, window: int = RMS_WINDOW):
        self.buf: deque[float] = deque(maxlen=window)

    def push(self, v: float) -> float:
        self.buf.append(v)
        return sum(self.buf) / len(self.buf)


@dataclass
class MetricsRow:
    """One CSV row of a run; per-channel and per-region fields are keyed by name."""

    tick: int
    inputs: dict[str, float] = field(default_factory=dict)
    predictions: dict[str, float | None] = field(default_factory=dict)
    errors: dict[str, float | None] = field(default_factory=dict)
    rms: float | None = None
    has_prediction: bool = False
    persistence: dict[str, float] = field(default_factory=dict)
    connected: dict[str, float] = field(default_factory=dict)

    def header(self) -> list[str]:
        cols = ["tick"]
        cols += [f"input_{c}" for c in self.inputs]
        cols += [f"prediction_{c}" for c in self.predictions]
        cols += [f"abs_error_{c}" for c in self.errors]
        cols += [f"rms{RMS_WINDOW}", "has_prediction"]
        cols += [f"persistence_{r}" for r in self.persistence]
        cols += [f"connected_{r}" for r in self.connected]
        return cols

    def cells(self) -> list[str]:
        vals = [self.tick, *self.inputs.values(), *self.predictions.values(), *self.errors.values(),
                self.rms, self.has_prediction, *self.persistence.values(), *self.connected.values()]
        return [fmt(v) for v in vals]


def write_metrics(path: str | Path, rows: Sequence[MetricsRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if rows:
            w.writerow(rows[0].header())
        for r in rows:
            w.writerow(r.cells())


def write_matrix_csv(path: str | Path, mat: np.ndarray, labels: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if labels is not None:
            w.writerow(["", *labels])
        for i, row in enumerate(np.asarray(mat)):
            cells = [fmt(v) for v in row.tolist()]
            w.writerow([labels[i], *cells] if labels is not None else cells)


def similarity_matrix(vectors: Sequence[SparseBitVector]) -> np.ndarray:
    n = len(vectors)
    out = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = jaccard(vectors[i], vectors[j])
    return out


def lissajous_support(enc: EncoderSpec, points: Iterable[tuple[float, float]]) -> np.ndarray:
    """Axon pairs (channel 1, channel 2) that are ever co-active for the given inputs."""
    ideal = np.zeros((enc.N, enc.N), dtype=bool)
    for s1, s2 in points:
        a = encode(enc, s1).active
        b = encode(enc, s2).active
        ideal[np.ix_(a, b)] = True
    return ideal


def write_matrix_pgm(path: str | Path, mat: np.ndarray) -> None:
    write_pgm(path, np.asarray(mat, dtype=np.float64))
