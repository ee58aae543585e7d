"""Binary correlator: the feed-forward synapse array that picks active mini-columns."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .bitvec import SparseBitVector
from .codec import write_pgm
from .synapses import (
    PlasticityParams,
    SynapseArray,
    UpdateStats,
    default_init_p,
    grow_synapses,
    kwta,
    update,
)

__all__ = [
    "CorrelatorState",
    "default_k",
    "make_correlator",
    "hardwire",
    "forward",
    "reconstruct",
    "covariance",
    "write_covariance_csv",
    "write_covariance_pgm",
]

HARDWIRED = "hardwired"
LEARNING = "learning"


def default_k(n: int) -> int:
    """Active columns per step: the square root of the column count."""
    return max(1, int(round(np.sqrt(n))))


@dataclass
class CorrelatorState:
    array: SynapseArray
    k_out: int
    mode: str = LEARNING
    params: PlasticityParams = field(default_factory=PlasticityParams)
    init_p: float | None = None
    recruit: bool = True
    last_stats: UpdateStats | None = None

    def __post_init__(self):
        if self.mode not in (HARDWIRED, LEARNING):
            raise ValueError(f"unknown correlator mode {self.mode!r}")
        if not 1 <= self.k_out <= min(self.array.n, 2 * np.sqrt(self.array.n)):
            raise ValueError(f"k_out={self.k_out} out of range for {self.array.n} columns")
        if self.init_p is None:
            self.init_p = default_init_p(self.array.weight_bits, self.params.delta_AA)

    @property
    def m(self) -> int:
        return self.array.m

    @property
    def n(self) -> int:
        return self.array.n


def make_correlator(m: int, n: int, k_out: int | None = None, weight_bits: int | None = None,
                    params: PlasticityParams | None = None, max_fanin: int | None = None) -> CorrelatorState:
    """Empty learning correlator."""
    arr = SynapseArray(m, n, weight_bits, max_fanin)
    return CorrelatorState(arr, k_out or default_k(n), LEARNING, params or PlasticityParams())


def hardwire(m: int, n: int, fanin: int, seed: int, k_out: int | None = None) -> CorrelatorState:
    """Fixed unit-weight correlator with even, seeded random wiring.

    Every dendrite receives exactly ``fanin`` distinct axons and axon fan-outs
    differ by at most one.
    """
    if fanin < 1 or fanin * n < m or fanin > m:
        raise ValueError(f"cannot wire {m} axons onto {n} dendrites with fan-in {fanin}")
    rng = np.random.default_rng(seed)
    total = fanin * n
    q, rem = divmod(total, m)
    counts = np.full(m, q)
    counts[rng.permutation(m)[:rem]] += 1
    stubs = rng.permutation(np.repeat(np.arange(m), counts))
    slots = stubs.reshape(n, fanin)
    _repair_duplicates(slots, rng)
    arr = SynapseArray(m, n, weight_bits=1)
    arr.add(slots.reshape(-1), np.repeat(np.arange(n), fanin), 1.0)
    return CorrelatorState(arr, k_out or default_k(n), HARDWIRED)


def _repair_duplicates(slots: np.ndarray, rng: np.random.Generator) -> None:
    """Swap stubs between dendrites until no dendrite repeats an axon."""
    n, fanin = slots.shape
    for _ in range(100 * n):
        bad = [j for j in range(n) if np.unique(slots[j]).size < fanin]
        if not bad:
            return
        for j in bad:
            row = slots[j]
            vals, first = np.unique(row, return_index=True)
            dup_pos = np.setdiff1d(np.arange(fanin), first)
            for p in dup_pos:
                a = row[p]
                for _ in range(10 * n):
                    o = int(rng.integers(n))
                    q = int(rng.integers(fanin))
                    b = slots[o, q]
                    if o != j and b not in row and a not in slots[o]:
                        slots[j, p], slots[o, q] = b, a
                        break
    raise RuntimeError("could not produce duplicate-free wiring")


def forward(state: CorrelatorState, x: SparseBitVector, gain: np.ndarray | None = None,
            learn: bool = True) -> SparseBitVector:
    """Activate the ``k_out`` most excited columns; learn when in learning mode.

    ``gain`` multiplies each input axon's contribution.  Plasticity always uses
    the raw binary input.  A learning correlator that finds fewer than
    ``k_out`` columns matching at least half of the active input recruits one
    idle column per step and wires the current input onto it, so unfamiliar
    input is learned from an empty array.  The recruit displaces the least
    excited winner when all ``k_out`` slots are taken.
    """
    if x.length != state.m:
        raise ValueError(f"input length {x.length} != correlator width {state.m}")
    if gain is not None:
        gain = np.asarray(gain, dtype=np.float64)
        if gain.shape != (state.m,) or np.any(gain < 0):
            raise ValueError("gain must be a non-negative vector over input axons")
    e = state.array.excite(x, gain)
    winners = kwta(e, state.k_out)
    if state.mode == LEARNING and learn and x.cardinality:
        recruited = 0
        if state.recruit and _matched(state.array, x) < state.k_out:
            winners, recruited = _recruit(state, x, winners, e)
        y = SparseBitVector._trusted(winners, state.n)
        stats = update(state.array, x, y, state.params)
        stats.grown = recruited + grow_synapses(state.array, x, y, state.init_p)
        state.last_stats = stats
        return y
    return SparseBitVector._trusted(winners, state.n)


def _matched(arr: SynapseArray, x: SparseBitVector) -> int:
    """Columns connected to at least half of the active axons."""
    hit = x.to_mask()[arr.axon] & arr.connected()
    counts = np.bincount(arr.dend[hit], minlength=arr.n)
    return int(np.count_nonzero(2 * counts >= x.cardinality))


def _recruit(state: CorrelatorState, x: SparseBitVector, winners: np.ndarray,
             e: np.ndarray) -> tuple[np.ndarray, int]:
    """Wire every active axon onto the least-connected idle column.

    One column per step; it joins the winners, replacing the weakest one
    (highest index on ties) if the set is full.  Returns the new winner set
    and the number of synapses created.
    """
    arr = state.array
    fanin = arr.fanin().astype(np.float64)
    fanin[winners] = np.inf
    if arr.max_fanin is not None:
        fanin[fanin + x.cardinality > arr.max_fanin] = np.inf
    j = int(np.argmin(fanin))
    if not np.isfinite(fanin[j]):
        return winners, 0
    if winners.size >= state.k_out:
        keys = np.round(e[winners], 9)
        weakest = np.lexsort((-winners, keys))[0]
        winners = np.delete(winners, weakest)
    have = arr.axon[arr.dend == j]
    new = np.setdiff1d(x.active, have)
    arr.add(new, np.full(new.size, j), state.init_p)
    return np.sort(np.append(winners, j)), int(new.size)


def reconstruct(state: CorrelatorState, y_hat: SparseBitVector, k_in: int | Sequence[int],
                widths: Sequence[int] | None = None) -> SparseBitVector:
    """Predicted input: the ``k_in`` most excited axons of W y_hat.

    With ``widths`` the input is treated as concatenated channels and each
    channel keeps its own top ``k_in[c]`` axons.
    """
    if y_hat.length != state.n:
        raise ValueError(f"column vector length {y_hat.length} != {state.n}")
    e = state.array.excite_reverse(y_hat)
    if widths is None:
        return SparseBitVector._trusted(kwta(e, int(k_in)), state.m)
    if sum(widths) != state.m:
        raise ValueError("channel widths must sum to the correlator width")
    ks = [int(k_in)] * len(widths) if np.ndim(k_in) == 0 else list(k_in)
    parts, offset = [], 0
    for w, k in zip(widths, ks):
        parts.append(kwta(e[offset:offset + w], k) + offset)
        offset += w
    return SparseBitVector._trusted(np.concatenate(parts), state.m)


def covariance(state: CorrelatorState) -> np.ndarray:
    """Count of dendrites connected to both axons i and j (W^T W)."""
    arr = state.array
    conn = arr.connected()
    b = sp.csr_matrix((np.ones(int(conn.sum()), dtype=np.int64), (arr.axon[conn], arr.dend[conn])),
                      shape=(arr.m, arr.n))
    return (b @ b.T).toarray()


def write_covariance_csv(path: str | Path, cov: np.ndarray) -> None:
    np.savetxt(path, cov, fmt="%d", delimiter=",")


def write_covariance_pgm(path: str | Path, cov: np.ndarray) -> None:
    write_pgm(path, cov)
