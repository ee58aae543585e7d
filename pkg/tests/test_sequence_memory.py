import numpy as np
import pytest

from cal.bitvec import SparseBitVector
from cal.codec import decode, encode, make_encoder
from cal.region import CorrelatorConfig, Region, RegionConfig, predict_scalar
from cal.sequence_memory import (
    SequenceMemory,
    SMGeometry,
    active_cells,
    bursting,
    excite,
    predict_cells,
    select_segments,
    unpredicted_columns,
    verified,
)
from cal.synapses import SynapseArray

G22 = SMGeometry(2, 2, 1)


def V(idx, n):
    return SparseBitVector(idx, n)


class TestVerified:
    def test_direct(self):
        assert list(verified(G22, V([0], 2), V([1], 4))) == [1]

    def test_no_predictions(self):
        assert verified(G22, V([0, 1], 2), V([], 4)).cardinality == 0

    def test_no_columns(self):
        assert verified(G22, V([], 2), V([1, 2], 4)).cardinality == 0


class TestUnpredicted:
    def test_partial(self):
        assert list(unpredicted_columns(G22, V([0, 1], 2), V([3], 4))) == [0]

    def test_all_predicted(self):
        assert unpredicted_columns(G22, V([0, 1], 2), V([0, 3], 4)).cardinality == 0

    def test_cold_start(self):
        assert list(unpredicted_columns(G22, V([0, 1], 2), V([], 4))) == [0, 1]


class TestBursting:
    g = SMGeometry(3, 3, 1)

    def test_replicates(self):
        assert list(bursting(self.g, V([1], 3))) == [3, 4, 5]

    def test_empty(self):
        assert bursting(self.g, V([], 3)).cardinality == 0

    def test_everything(self):
        assert list(bursting(self.g, V([0, 1, 2], 3))) == list(range(9))


class TestActive:
    def test_union(self):
        assert list(active_cells(V([1], 6), V([4, 5], 6))) == [1, 4, 5]

    def test_no_burst(self):
        v = V([1], 6)
        assert active_cells(v, V([], 6)) == v


class TestExcite:
    def test_empty(self):
        W = SynapseArray(4, 8)
        W.add([0], [7], 0.8)
        assert not excite(V([], 4), W).any()

    def test_single(self):
        W = SynapseArray(4, 8)
        W.add([0], [7], 0.8)
        assert excite(V([0], 4), W)[7] == pytest.approx(0.8, abs=1e-4)


class TestSelect:
    g = SMGeometry(4, 2, 2)  # D = 4

    def test_top_k_only(self):
        d = np.arange(16, dtype=float)
        s = select_segments(self.g, d, V([], 4), 3, np.random.default_rng(0))
        assert list(s) == [13, 14, 15]

    def test_random_for_silent_column(self):
        d = np.zeros(16)
        d[0] = 1.0
        s = select_segments(self.g, d, V([2], 4), 1, np.random.default_rng(0))
        extra = [i for i in s if i != 0]
        assert len(extra) == 1 and 8 <= extra[0] < 12

    def test_argmax_branch(self):
        d = np.zeros(16)
        d[4 + 3] = 0.3
        d[4 + 1] = 0.1
        s = select_segments(self.g, d, V([1], 4), 0, np.random.default_rng(0))
        assert list(s) == [7]


class TestPredict:
    g = SMGeometry(4, 2, 2)

    def test_empty(self):
        assert predict_cells(self.g, V([], 16)).cardinality == 0

    def test_one_segment(self):
        assert list(predict_cells(self.g, V([11], 16))) == [5]

    def test_two_segments_same_cell(self):
        assert list(predict_cells(self.g, V([10, 11], 16))) == [5]


class TestStep:
    def test_cold_start_bursts(self):
        sm = SequenceMemory(SMGeometry(8, 4, 2), k=2)
        v, z, a = sm.step(V([1, 5], 8))
        assert v.cardinality == 0
        assert list(a) == [4, 5, 6, 7, 20, 21, 22, 23]

    def test_learning_and_invariants(self):
        g = SMGeometry(16, 4, 2)
        sm = SequenceMemory(g, k=3, seed=1)
        seq = [V([0, 1, 2], 16), V([4, 5, 6], 16), V([8, 9, 10], 16), V([12, 13, 14], 16)]
        for t in range(200):
            y = seq[t % 4]
            z_prev = sm.z_prev
            v, z, a = sm.step(y)
            assert np.array_equal(np.unique(a.active // g.n_cell), y.active)
            assert (v & z_prev) == v
            assert predict_cells(g, sm.s_prev) == z
        # fully predicted: no bursting, one cell per column
        v, z, a = sm.step(seq[200 % 4])
        assert a == v and v.cardinality == 3

    def test_verified_strengthens_refuted_weakens(self):
        g = SMGeometry(4, 1, 1)
        sm = SequenceMemory(g, k=1)
        sm.step(V([0], 4))
        sm.step(V([1], 4))  # grows 0 -> segment of column 1
        p0 = sm.W.permanence(0, 1)
        sm.step(V([0], 4))
        sm.step(V([1], 4))  # prediction of column 1 verified
        assert sm.W.permanence(0, 1) > p0
        sm.step(V([0], 4))
        p1 = sm.W.permanence(0, 1)
        sm.step(V([2], 4))  # prediction refuted
        assert sm.W.permanence(0, 1) < p1

    def test_deterministic(self):
        def trace(seed):
            sm = SequenceMemory(SMGeometry(16, 4, 2), k=3, seed=seed)
            rng = np.random.default_rng(7)
            out = []
            for _ in range(100):
                y = SparseBitVector(np.sort(rng.choice(16, 3, replace=False)), 16)
                out.append(tuple(str(v) for v in sm.step(y)))
            return out, sm.W.to_bytes()
        assert trace(3) == trace(3)

    def test_abcd_prediction(self):
        enc = make_encoder(0, 3, 1, 5, "integer")
        cfg = RegionConfig(SMGeometry(32, 4, 2), enc.N,
                           correlator=CorrelatorConfig(mode="hardwired", fanin=2, k=8),
                           channels=[(enc.N, enc.k)], seed=0)
        region = Region(cfg, "R", [enc])
        # this wiring reconstructs every symbol exactly, so decoding is unambiguous
        for s in range(4):
            y = region.step([encode(enc, s)], learn=False).y
            assert decode(enc, region._reconstruct_columns(y)) == s
        region.reset()
        for t in range(50 * 4):
            region.step([encode(enc, t % 4)])
        region.step([encode(enc, 0)], learn=False)
        out = region.step([encode(enc, 1)], learn=False)
        c_cols = region.step([encode(enc, 2)], learn=False).y
        assert np.array_equal(np.unique(out.z.active // 4), c_cols.active)
        assert predict_scalar(region, [enc], out.z) == [2.0]
