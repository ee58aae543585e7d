"""Plastic synapse arrays.

A :class:`SynapseArray` holds the realized synapses between ``m`` axons and
``n`` dendrites as coordinate triplets.  Permanence is kept in 16-bit fixed
point (``P_SCALE`` units per 1.0) so that updates are exact integer
arithmetic and snapshots round-trip bit for bit; the weight seen by
activation is a quantized view of permanence.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .bitvec import SparseBitVector

__all__ = [
    "P_SCALE",
    "PlasticityParams",
    "UpdateStats",
    "SynapseArray",
    "quantize",
    "metaplastic_factor",
    "kwta",
    "kwta_activate",
    "update",
    "grow_synapses",
    "default_init_p",
]

P_SCALE = 65535
WEIGHT_BITS = (1, 2, 3, 4, 8, None)
_MAGIC = b"CALSYN1\0"
_HEADER = struct.Struct("<8sIIiiQ")


@dataclass
class PlasticityParams:
    """Learning-rate coefficients of the Hebbian / anti-Hebbian rule.

    With ``balance`` set, the anti-Hebbian coefficients are derived each step
    so that the total decrement matches the total Hebbian increment and
    ``delta_AI`` / ``delta_IA`` are ignored.
    """

    delta_AA: float = 0.1
    delta_AI: float = 0.05
    delta_IA: float = 0.05
    balance: bool = True
    meta: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if not self.delta_AA > 0:
            raise ValueError("delta_AA must be positive")
        if self.delta_AI < 0 or self.delta_IA < 0:
            raise ValueError("anti-Hebbian coefficients must be non-negative")


@dataclass
class UpdateStats:
    strengthened: int = 0
    weakened: int = 0
    pruned: int = 0
    increment: float = 0.0
    decrement: float = 0.0
    grown: int = 0

    def __iadd__(self, other: "UpdateStats") -> "UpdateStats":
        self.strengthened += other.strengthened
        self.weakened += other.weakened
        self.pruned += other.pruned
        self.increment += other.increment
        self.decrement += other.decrement
        self.grown += other.grown
        return self


def _levels(bits: int | None) -> int:
    return P_SCALE if bits is None else (1 << bits) - 1


def quantize(p, bits: int | None):
    """Reduced-precision weight for permanence ``p`` (round half up)."""
    if bits is None:
        return p
    levels = _levels(bits)
    w = np.floor(np.asarray(p, dtype=np.float64) * levels + 0.5) / levels
    return float(w) if np.ndim(p) == 0 else w


def metaplastic_factor(p):
    """Fraction of an anti-Hebbian decrement a synapse of permanence ``p`` receives."""
    return 1.0 - p


def default_init_p(bits: int | None, delta_AA: float = 0.1) -> float:
    """Smallest permanence whose weight is nonzero.

    Full precision has no such minimum; one Hebbian increment is used instead.
    """
    if bits is None:
        return round(delta_AA * P_SCALE) / P_SCALE
    units = int(np.ceil(0.5 / _levels(bits) * P_SCALE))
    while quantize(units / P_SCALE, bits) == 0:
        units += 1
    return units / P_SCALE


def _to_units(p: float) -> int:
    return int(round(p * P_SCALE))


class SynapseArray:
    """Sparse permanence matrix between ``m`` axons and ``n`` dendrites."""

    def __init__(self, m: int, n: int, weight_bits: int | None = None, max_fanin: int | None = None):
        if m < 1 or n < 1:
            raise ValueError("synapse array needs at least one axon and one dendrite")
        if weight_bits not in WEIGHT_BITS:
            raise ValueError(f"weight_bits must be one of {WEIGHT_BITS}")
        self.m = int(m)
        self.n = int(n)
        self.weight_bits = weight_bits
        self.max_fanin = max_fanin
        self.axon = np.empty(0, dtype=np.int32)
        self.dend = np.empty(0, dtype=np.int32)
        self.perm = np.empty(0, dtype=np.int32)
        self._level_cache: np.ndarray | None = None
        self._index_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    # -- storage ---------------------------------------------------------
    @property
    def nnz(self) -> int:
        return int(self.perm.size)

    @property
    def levels(self) -> int:
        return _levels(self.weight_bits)

    def _touch(self, structure: bool = True) -> None:
        self._level_cache = None
        if structure:
            self._index_cache = {}

    def _index(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        """(order, indptr) grouping synapse positions by axon or by dendrite."""
        if side not in self._index_cache:
            keys, size = (self.axon, self.m) if side == "axon" else (self.dend, self.n)
            order = np.argsort(keys, kind="stable")
            ptr = np.searchsorted(keys[order], np.arange(size + 1))
            self._index_cache[side] = (order, ptr)
        return self._index_cache[side]

    def synapses_of(self, side: str, lines: np.ndarray, ordered: bool = True) -> np.ndarray:
        """Positions of all synapses on the given axons or dendrites (ascending if ``ordered``)."""
        order, ptr = self._index(side)
        lines = np.asarray(lines, dtype=np.int64)
        starts, ends = ptr[lines], ptr[lines + 1]
        lens = ends - starts
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        if lines.size == 1:
            pos = order[starts[0]:ends[0]]
        else:
            pos = order[np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)]
        return np.sort(pos) if ordered else pos

    def weight_levels(self) -> np.ndarray:
        """Integer weight level of every stored synapse (as float64)."""
        if self._level_cache is None:
            if self.weight_bits is None:
                lv = self.perm.astype(np.float64)
            else:
                lv = np.floor(self.perm.astype(np.float64) * self.levels / P_SCALE + 0.5)
            self._level_cache = lv
        return self._level_cache

    def weights(self) -> np.ndarray:
        return self.weight_levels() / self.levels

    def permanences(self) -> np.ndarray:
        return self.perm / P_SCALE

    def connected(self) -> np.ndarray:
        return self.weight_levels() > 0

    def add(self, axons, dends, p: float | np.ndarray) -> None:
        """Append synapses; pairs must not already exist."""
        axons = np.asarray(axons, dtype=np.int32).reshape(-1)
        dends = np.asarray(dends, dtype=np.int32).reshape(-1)
        units = np.broadcast_to(np.rint(np.asarray(p, dtype=np.float64) * P_SCALE).astype(np.int32), axons.shape)
        if axons.size == 0:
            return
        if axons.min() < 0 or axons.max() >= self.m or dends.min() < 0 or dends.max() >= self.n:
            raise IndexError("synapse index out of range")
        if np.any(units < 0) or np.any(units > P_SCALE):
            raise ValueError("permanence must lie in [0, 1]")
        self.axon = np.concatenate([self.axon, axons])
        self.dend = np.concatenate([self.dend, dends])
        self.perm = np.concatenate([self.perm, units.astype(np.int32)])
        self._touch()

    def permanence(self, i: int, j: int) -> float:
        hit = np.flatnonzero((self.axon == i) & (self.dend == j))
        return float(self.perm[hit[0]] / P_SCALE) if hit.size else 0.0

    def fanin(self) -> np.ndarray:
        return np.bincount(self.dend, minlength=self.n)

    def fanout(self) -> np.ndarray:
        return np.bincount(self.axon, minlength=self.m)

    def connected_fraction(self) -> float:
        return float(np.count_nonzero(self.connected())) / (self.m * self.n)

    def dense_permanence(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self.axon, self.dend] = self.permanences()
        return out

    def dense_weights(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self.axon, self.dend] = self.weights()
        return out

    def _prune(self) -> int:
        keep = self.perm > 0
        dropped = int(keep.size - np.count_nonzero(keep))
        if dropped:
            self.axon = self.axon[keep]
            self.dend = self.dend[keep]
            self.perm = self.perm[keep]
            self._touch()
        return dropped

    def copy(self) -> "SynapseArray":
        other = SynapseArray(self.m, self.n, self.weight_bits, self.max_fanin)
        other.axon, other.dend, other.perm = self.axon.copy(), self.dend.copy(), self.perm.copy()
        return other

    # -- activation ------------------------------------------------------
    def excite(self, x: SparseBitVector, gain: np.ndarray | None = None) -> np.ndarray:
        """Dendrite excitation x^T W, optionally with per-axon gain."""
        if x.length != self.m:
            raise ValueError(f"input length {x.length} != axon count {self.m}")
        if x.cardinality == 0 or self.nnz == 0:
            return np.zeros(self.n)
        sel = self.synapses_of("axon", x.active, ordered=False)
        w = self.weight_levels()[sel]
        if gain is not None:
            w = w * np.asarray(gain, dtype=np.float64)[self.axon[sel]]
        return np.bincount(self.dend[sel], weights=w, minlength=self.n) / self.levels

    def excite_reverse(self, y: SparseBitVector) -> np.ndarray:
        """Axon excitation W y, used for reconstruction."""
        if y.length != self.n:
            raise ValueError(f"output length {y.length} != dendrite count {self.n}")
        if y.cardinality == 0 or self.nnz == 0:
            return np.zeros(self.m)
        sel = self.synapses_of("dend", y.active, ordered=False)
        return np.bincount(self.axon[sel], weights=self.weight_levels()[sel], minlength=self.m) / self.levels

    # -- persistence -----------------------------------------------------
    def to_bytes(self) -> bytes:
        bits = 0 if self.weight_bits is None else self.weight_bits
        fanin = -1 if self.max_fanin is None else self.max_fanin
        buf = io.BytesIO()
        buf.write(_HEADER.pack(_MAGIC, self.m, self.n, bits, fanin, self.nnz))
        buf.write(self.axon.astype("<u4").tobytes())
        buf.write(self.dend.astype("<u4").tobytes())
        buf.write(self.perm.astype("<u2").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SynapseArray":
        if len(data) < _HEADER.size:
            raise ValueError("synapse snapshot truncated")
        magic, m, n, bits, fanin, count = _HEADER.unpack_from(data)
        if magic != _MAGIC:
            raise ValueError("not a synapse array snapshot")
        expected = _HEADER.size + count * 10
        if len(data) != expected:
            raise ValueError(f"synapse snapshot size {len(data)} != {expected}")
        arr = cls(m, n, None if bits == 0 else bits, None if fanin < 0 else fanin)
        off = _HEADER.size
        arr.axon = np.frombuffer(data, "<u4", count, off).astype(np.int32)
        arr.dend = np.frombuffer(data, "<u4", count, off + 4 * count).astype(np.int32)
        arr.perm = np.frombuffer(data, "<u2", count, off + 8 * count).astype(np.int32)
        if count and (arr.axon.max() >= m or arr.dend.max() >= n):
            raise ValueError("synapse snapshot index out of range")
        return arr


def kwta(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest positive values, ascending.

    Values within 1e-9 of each other are tied; ties go to the lowest index.
    Fewer than ``k`` indices come back when fewer values are positive.
    """
    cand = np.flatnonzero(values > 0)
    if cand.size <= k:
        return cand
    keys = np.round(values[cand], 9)
    order = np.argsort(-keys, kind="stable")[:k]
    return np.sort(cand[order])


def kwta_activate(arr: SynapseArray, x: SparseBitVector, k: int, gain: np.ndarray | None = None) -> SparseBitVector:
    """Multiply, accumulate and keep the ``k`` most excited dendrites."""
    if not 1 <= k <= arr.n:
        raise ValueError(f"k={k} outside [1, {arr.n}]")
    return SparseBitVector(kwta(arr.excite(x, gain), k), arr.n)


def _masks(arr: SynapseArray, x: SparseBitVector, y: SparseBitVector):
    if x.length != arr.m or y.length != arr.n:
        raise ValueError(f"update dims ({x.length}, {y.length}) != array ({arr.m}, {arr.n})")
    xm = np.zeros(arr.m, dtype=bool)
    xm[x.active] = True
    ym = np.zeros(arr.n, dtype=bool)
    ym[y.active] = True
    return xm[arr.axon], ym[arr.dend]


def update(
    arr: SynapseArray,
    x: SparseBitVector,
    y: SparseBitVector,
    params: PlasticityParams,
    ai_scope: SparseBitVector | None = None,
) -> UpdateStats:
    """Apply the Hebbian / anti-Hebbian permanence update to existing synapses.

    Pairs with axon and dendrite both active gain ``delta_AA``; pairs with only
    the axon active lose ``delta_AI``; pairs with only the dendrite active lose
    ``delta_IA``.  ``ai_scope`` limits the axon-only term to the listed
    dendrites.  Permanences are clipped to [0, 1] and zero-permanence synapses
    are removed.
    """
    if x.length != arr.m or y.length != arr.n:
        raise ValueError(f"update dims ({x.length}, {y.length}) != array ({arr.m}, {arr.n})")
    # only synapses on an active axon or an active dendrite can change
    local = np.union1d(arr.synapses_of("axon", x.active), arr.synapses_of("dend", y.active))
    xa = x.to_mask()[arr.axon[local]]
    ya = y.to_mask()[arr.dend[local]]
    if ai_scope is not None:
        if ai_scope.length != arr.n:
            raise ValueError("ai_scope length must equal dendrite count")
        ai = xa & ~ya & ai_scope.to_mask()[arr.dend[local]]
    else:
        ai = xa & ~ya
    aa = xa & ya
    ia = ~xa & ya
    n_aa, n_ai, n_ia = (int(np.count_nonzero(v)) for v in (aa, ai, ia))

    inc = _to_units(params.delta_AA)
    if params.balance:
        dec_ai = dec_ia = _to_units(params.delta_AA * n_aa / max(1, n_ai + n_ia))
    else:
        dec_ai, dec_ia = _to_units(params.delta_AI), _to_units(params.delta_IA)

    stats = UpdateStats(strengthened=n_aa)
    if n_aa + n_ai + n_ia == 0:
        return stats
    old = arr.perm[local]
    delta = np.zeros(old.size, dtype=np.int64)
    delta[aa] = inc
    dec = np.zeros(old.size, dtype=np.int64)
    dec[ai] = dec_ai
    dec[ia] = dec_ia
    if params.meta:
        # protection grows linearly with permanence
        dec = (dec * (P_SCALE - old.astype(np.int64)) + P_SCALE // 2) // P_SCALE
    new = np.clip(old.astype(np.int64) + delta - dec, 0, P_SCALE)
    stats.increment = float(np.sum(np.minimum(delta, P_SCALE - old))) / P_SCALE
    stats.decrement = float(np.sum(np.minimum(dec, old))) / P_SCALE
    stats.weakened = int(np.count_nonzero(dec))
    perm = arr.perm.copy()
    perm[local] = new
    arr.perm = perm
    arr._touch(structure=False)
    stats.pruned = arr._prune() if np.any(new == 0) else 0
    return stats


def grow_synapses(
    arr: SynapseArray,
    x: SparseBitVector,
    y: SparseBitVector,
    init_p: float,
    budget: int | None = None,
) -> int:
    """Connect every active axon lacking a connected synapse onto an active dendrite.

    Each such axon (ascending) gains one synapse onto the active dendrite with
    the fewest synapses before this call (lowest index on ties), so axons that
    become active together share a dendrite.  Dendrites at ``max_fanin`` and
    dendrites the axon already reaches are skipped.  Returns the count created.
    """
    if x.length != arr.m or y.length != arr.n:
        raise ValueError("grow dims do not match array")
    if x.cardinality == 0 or y.cardinality == 0 or budget == 0:
        return 0
    xa, ya = _masks(arr, x, y)
    both = xa & ya
    served = np.unique(arr.axon[both & arr.connected()])
    needy = np.setdiff1d(x.active, served, assume_unique=True)
    if needy.size == 0:
        return 0
    targets = y.active
    before = arr.fanin()[targets].astype(np.int64)
    fanin = before.copy()
    cap = np.inf if arr.max_fanin is None else arr.max_fanin
    # existing (axon, target) pairs that must not be duplicated
    pos = np.searchsorted(targets, arr.dend[both])
    existing = {}
    for a, t in zip(arr.axon[both].tolist(), pos.tolist()):
        existing.setdefault(a, []).append(t)
    new_a, new_d = [], []
    for a in needy.tolist():
        if budget is not None and len(new_a) >= budget:
            break
        cost = np.where(fanin < cap, before, np.iinfo(np.int64).max)
        if a in existing:
            cost = cost.copy()
            cost[existing[a]] = np.iinfo(np.int64).max
        t = int(np.argmin(cost))
        if cost[t] == np.iinfo(np.int64).max:
            continue
        new_a.append(a)
        new_d.append(int(targets[t]))
        fanin[t] += 1
    arr.add(new_a, new_d, init_p)
    return len(new_a)
