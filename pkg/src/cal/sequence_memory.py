"""Recurrent mini-column sequence memory.

Indexing: cell ``i`` of column ``j`` is ``j * n_cell + i``; segment ``q`` of
cell ``c`` is ``c * n_seg + q``.  Column ``j`` therefore owns the contiguous
segment block ``[j * D, (j + 1) * D)`` with ``D = n_seg * n_cell``.

One step at time t:

1. verified cells ``v`` = cells of active columns that were predicted at t-1;
2. unpredicted active columns ``u`` burst (all their cells fire); ``a = v | b``;
3. learning on the previous step: the segments selected at t-1, plus one
   segment per bursting column (its best match to the t-1 excitation, or a
   random one when nothing matched), are reinforced from ``a(t-1)`` when their
   cell fired now and weakened otherwise; under-supported reinforced segments
   grow synapses from the t-1 winner cells;
4. ``d = a^T W``, the ``k`` most excited segments predict their cells.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitvec import SparseBitVector
from .synapses import (
    PlasticityParams,
    SynapseArray,
    UpdateStats,
    default_init_p,
    kwta,
    update,
)

__all__ = [
    "SMGeometry",
    "SequenceMemory",
    "verified",
    "unpredicted_columns",
    "bursting",
    "active_cells",
    "excite",
    "select_segments",
    "predict_cells",
    "columns_of",
]


@dataclass(frozen=True)
class SMGeometry:
    n_col: int
    n_cell: int
    n_seg: int

    def __post_init__(self):
        if min(self.n_col, self.n_cell, self.n_seg) < 1:
            raise ValueError("geometry sizes must be positive")

    @property
    def cells(self) -> int:
        return self.n_col * self.n_cell

    @property
    def segments(self) -> int:
        return self.cells * self.n_seg

    @property
    def D(self) -> int:
        return self.n_seg * self.n_cell


def _check(v: SparseBitVector, n: int, what: str) -> None:
    if v.length != n:
        raise ValueError(f"{what} length {v.length} != {n}")


def columns_of(geom: SMGeometry, cells: SparseBitVector) -> SparseBitVector:
    _check(cells, geom.cells, "cell vector")
    return SparseBitVector(np.unique(cells.active // geom.n_cell), geom.n_col)


def verified(geom: SMGeometry, y: SparseBitVector, z_prev: SparseBitVector) -> SparseBitVector:
    """Predicted cells whose column is now active."""
    _check(y, geom.n_col, "column vector")
    _check(z_prev, geom.cells, "prediction vector")
    col_on = y.to_mask()
    return SparseBitVector(z_prev.active[col_on[z_prev.active // geom.n_cell]], geom.cells)


def unpredicted_columns(geom: SMGeometry, y: SparseBitVector, z_prev: SparseBitVector) -> SparseBitVector:
    _check(y, geom.n_col, "column vector")
    return y - columns_of(geom, z_prev)


def bursting(geom: SMGeometry, u: SparseBitVector) -> SparseBitVector:
    """Every cell of every column in ``u``."""
    _check(u, geom.n_col, "column vector")
    cells = (u.active[:, None] * geom.n_cell + np.arange(geom.n_cell)).reshape(-1)
    return SparseBitVector(cells, geom.cells)


def active_cells(v: SparseBitVector, b: SparseBitVector) -> SparseBitVector:
    return v | b


def excite(a: SparseBitVector, W: SynapseArray) -> np.ndarray:
    """Lateral segment excitation a^T W."""
    return W.excite(a)


def select_segments(geom: SMGeometry, d: np.ndarray, u: SparseBitVector, k: int,
                    rng: np.random.Generator) -> SparseBitVector:
    """k most excited segments, plus the best segment of each column in ``u``.

    A column whose segments are all unexcited contributes a uniformly random
    segment; random draws are taken in ascending column order.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (geom.segments,):
        raise ValueError(f"excitation length {d.shape} != {geom.segments}")
    _check(u, geom.n_col, "column vector")
    chosen = [kwta(d, k)]
    D = geom.D
    extra = []
    for j in u.active.tolist():
        block = d[j * D:(j + 1) * D]
        if not np.any(block > 0):
            i = int(rng.integers(D))
        else:
            i = int(np.argmax(block))
        extra.append(j * D + i)
    if extra:
        chosen.append(np.asarray(extra, dtype=np.int64))
    return SparseBitVector(np.unique(np.concatenate(chosen)), geom.segments)


def predict_cells(geom: SMGeometry, s: SparseBitVector) -> SparseBitVector:
    """Cells owning at least one selected segment."""
    _check(s, geom.segments, "segment vector")
    return SparseBitVector(np.unique(s.active // geom.n_seg), geom.cells)


@dataclass
class SequenceMemory:
    """Stateful sequence memory for one region.

    ``k`` is the number of segments selected per step (the correlator's
    ``k_out``).  ``sample`` bounds how many synapses a reinforced segment is
    grown from the previous winner cells.
    """

    geom: SMGeometry
    k: int
    params: PlasticityParams = field(default_factory=lambda: PlasticityParams(delta_AA=0.1, balance=False,
                                                                               delta_AI=0.1, delta_IA=0.02))
    weight_bits: int | None = None
    init_p: float | None = None
    sample: int | None = None
    seed: int = 0
    learning: bool = True

    def __post_init__(self):
        g = self.geom
        self.W = SynapseArray(g.cells, g.segments, self.weight_bits)
        if self.init_p is None:
            self.init_p = default_init_p(self.weight_bits, self.params.delta_AA)
        if self.sample is None:
            self.sample = max(1, (self.k + 1) // 2)
        self.rng = np.random.default_rng(self.seed)
        self.reset()
        self.last_stats = UpdateStats()

    def reset(self) -> None:
        """Forget the recurrent context (synapses are kept)."""
        g = self.geom
        self.z_prev = SparseBitVector.empty(g.cells)
        self.a_prev = SparseBitVector.empty(g.cells)
        self.w_prev = SparseBitVector.empty(g.cells)
        self.s_prev = SparseBitVector.empty(g.segments)
        self.d_prev = np.zeros(g.segments)
        self.started = False

    def step(self, y: SparseBitVector, learn: bool | None = None):
        """Advance one time-step on active columns ``y``; returns ``(v, z, a)``."""
        g = self.geom
        learn = self.learning if learn is None else learn
        v = verified(g, y, self.z_prev)
        u = unpredicted_columns(g, y, self.z_prev)
        b = bursting(g, u)
        a = active_cells(v, b)

        # segments credited with predicting t: those selected at t-1 plus,
        # for each bursting column, the one that came closest
        credited = select_segments(g, self.d_prev, u, self.k, self.rng)
        picks = credited - self.s_prev
        winners = v | predict_cells(g, picks)
        stats = UpdateStats()
        if learn and self.started:
            stats = self._learn(a, credited)

        d = excite(a, self.W)
        s = SparseBitVector(kwta(d, self.k), g.segments)
        z = predict_cells(g, s)

        self.z_prev, self.a_prev, self.w_prev = z, a, winners
        self.s_prev, self.d_prev = s, d
        self.started = True
        self.last_stats = stats
        return v, z, a

    def _learn(self, a: SparseBitVector, credited: SparseBitVector) -> UpdateStats:
        g = self.geom
        seg = credited.active
        fired = a.to_mask()[seg // g.n_seg]
        good = SparseBitVector(seg[fired], g.segments)
        bad = SparseBitVector(seg[~fired], g.segments)
        stats = update(self.W, self.a_prev, good, self.params, ai_scope=bad)
        stats.grown = self._grow(good)
        return stats

    def _grow(self, good: SparseBitVector) -> int:
        """Top up reinforced segments to ``sample`` connected synapses from t-1 winners."""
        src = self.w_prev.active
        if src.size == 0 or good.cardinality == 0:
            return 0
        W = self.W
        src_mask = np.zeros(W.m, dtype=bool)
        src_mask[src] = True
        seg_mask = np.zeros(W.n, dtype=bool)
        seg_mask[good.active] = True
        rel = src_mask[W.axon] & seg_mask[W.dend]
        have_a, have_d = W.axon[rel], W.dend[rel]
        conn = W.connected()[rel]
        support = np.bincount(have_d[conn], minlength=W.n)
        pairs = set(zip(have_d.tolist(), have_a.tolist()))
        new_a, new_d = [], []
        for sgm in good.active.tolist():
            need = self.sample - int(support[sgm])
            if need <= 0:
                continue
            cand = [c for c in src.tolist() if (sgm, c) not in pairs]
            if not cand:
                continue
            take = self.rng.permutation(len(cand))[:need]
            for t in sorted(take.tolist()):
                new_a.append(cand[t])
                new_d.append(sgm)
        W.add(new_a, new_d, self.init_p)
        return len(new_a)
