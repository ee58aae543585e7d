"""Sparse binary vectors and dense excitation vectors.

Every activity pattern in the network (encoder output, correlator winners,
cells, segments, feedback) is a :class:`SparseBitVector`: a declared length
plus a strictly increasing array of active indices.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SparseBitVector",
    "DenseExcitation",
    "cardinality",
    "overlap",
    "jaccard",
    "concat",
    "split",
    "union_window",
]


class SparseBitVector:
    """Immutable binary vector stored as sorted active indices."""

    __slots__ = ("_length", "_active")

    def __init__(self, active: Iterable[int] | np.ndarray, length: int):
        length = int(length)
        if length < 0:
            raise ValueError(f"negative length {length}")
        idx = np.asarray(active if not isinstance(active, (set, frozenset)) else sorted(active), dtype=np.int64)
        idx = idx.reshape(-1)
        if idx.size:
            if idx.size > 1 and np.any(np.diff(idx) <= 0):
                raise ValueError("active indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= length:
                raise ValueError(f"active index out of range [0, {length})")
        idx = idx.copy()
        idx.flags.writeable = False
        self._active = idx
        self._length = length

    @classmethod
    def _trusted(cls, active: np.ndarray, length: int) -> "SparseBitVector":
        # internal fast path: caller guarantees sorted, unique, in-range int64 indices
        v = cls.__new__(cls)
        idx = np.asarray(active, dtype=np.int64)
        idx.flags.writeable = False
        v._active = idx
        v._length = int(length)
        return v

    @classmethod
    def from_unsorted(cls, active: Iterable[int] | np.ndarray, length: int) -> "SparseBitVector":
        return cls(np.unique(np.asarray(list(active) if not isinstance(active, np.ndarray) else active, dtype=np.int64)), length)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "SparseBitVector":
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        return cls(np.flatnonzero(mask), mask.size)

    @classmethod
    def empty(cls, length: int) -> "SparseBitVector":
        return cls(np.empty(0, dtype=np.int64), length)

    @classmethod
    def parse(cls, text: str) -> "SparseBitVector":
        """Inverse of :meth:`__str__` (``len:N;idx:i1,i2,...``)."""
        try:
            head, body = text.strip().split(";", 1)
            if not head.startswith("len:") or not body.startswith("idx:"):
                raise ValueError
            length = int(head[4:])
            items = body[4:]
            idx = [int(t) for t in items.split(",")] if items else []
        except ValueError as exc:
            raise ValueError(f"malformed bit vector text {text!r}") from exc
        return cls(idx, length)

    @property
    def length(self) -> int:
        return self._length

    @property
    def active(self) -> np.ndarray:
        return self._active

    @property
    def cardinality(self) -> int:
        return int(self._active.size)

    def to_mask(self) -> np.ndarray:
        mask = np.zeros(self._length, dtype=bool)
        mask[self._active] = True
        return mask

    def __contains__(self, i: int) -> bool:
        pos = np.searchsorted(self._active, i)
        return bool(pos < self._active.size and self._active[pos] == i)

    def __iter__(self):
        return iter(self._active.tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseBitVector):
            return NotImplemented
        return self._length == other._length and np.array_equal(self._active, other._active)

    def __hash__(self) -> int:
        return hash((self._length, self._active.tobytes()))

    def __str__(self) -> str:
        return f"len:{self._length};idx:{','.join(map(str, self._active.tolist()))}"

    def __repr__(self) -> str:
        return f"SparseBitVector({self._active.tolist()}, length={self._length})"

    def __or__(self, other: "SparseBitVector") -> "SparseBitVector":
        _check_same_length(self, other)
        return SparseBitVector(np.union1d(self._active, other._active), self._length)

    def __and__(self, other: "SparseBitVector") -> "SparseBitVector":
        _check_same_length(self, other)
        return SparseBitVector(np.intersect1d(self._active, other._active, assume_unique=True), self._length)

    def __sub__(self, other: "SparseBitVector") -> "SparseBitVector":
        _check_same_length(self, other)
        return SparseBitVector(np.setdiff1d(self._active, other._active, assume_unique=True), self._length)


class DenseExcitation:
    """Real excitation level per dendrite, segment or gain slot."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float] | np.ndarray):
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise ValueError("excitation vector must be non-empty")
        if not np.all(np.isfinite(values)):
            raise ValueError("excitation values must be finite")
        self.values = values

    @property
    def length(self) -> int:
        return int(self.values.size)

    def __repr__(self) -> str:
        return f"DenseExcitation(length={self.length})"


def _check_same_length(a: SparseBitVector, b: SparseBitVector) -> None:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} != {b.length}")


def cardinality(v: SparseBitVector) -> int:
    """Pop-count of ``v``."""
    return v.cardinality


def overlap(a: SparseBitVector, b: SparseBitVector) -> int:
    _check_same_length(a, b)
    return int(np.intersect1d(a.active, b.active, assume_unique=True).size)


def jaccard(a: SparseBitVector, b: SparseBitVector) -> float:
    """|a & b| / |a | b|, with two empty vectors counting as identical."""
    _check_same_length(a, b)
    inter = np.intersect1d(a.active, b.active, assume_unique=True).size
    union = a.cardinality + b.cardinality - inter
    if union == 0:
        return 1.0
    return inter / union


def concat(vs: Sequence[SparseBitVector]) -> SparseBitVector:
    """Join vectors end to end, offsetting indices by the preceding lengths."""
    if len(vs) == 0:
        raise ValueError("cannot concatenate an empty list")
    if len(vs) == 1:
        return vs[0]
    offset = 0
    parts = []
    for v in vs:
        parts.append(v.active + offset)
        offset += v.length
    return SparseBitVector._trusted(np.concatenate(parts), offset)


def split(v: SparseBitVector, lengths: Sequence[int]) -> list[SparseBitVector]:
    """Cut ``v`` into consecutive pieces of the given lengths (inverse of concat)."""
    if sum(lengths) != v.length:
        raise ValueError(f"piece lengths sum to {sum(lengths)}, vector has length {v.length}")
    bounds = np.cumsum([0, *lengths])
    cuts = np.searchsorted(v.active, bounds)
    return [
        SparseBitVector._trusted(v.active[cuts[i]:cuts[i + 1]] - bounds[i], int(lengths[i]))
        for i in range(len(lengths))
    ]


def union_window(vs: Sequence[SparseBitVector]) -> SparseBitVector:
    """Logical OR of equal-length vectors."""
    if len(vs) == 0:
        raise ValueError("cannot pool an empty window")
    length = vs[0].length
    for v in vs[1:]:
        if v.length != length:
            raise ValueError(f"length mismatch: {v.length} != {length}")
    if len(vs) == 1:
        return vs[0]
    return SparseBitVector._trusted(np.unique(np.concatenate([v.active for v in vs])), length)
