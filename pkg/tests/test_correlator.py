import numpy as np
import pytest

from cal import correlator as bc
from cal.bitvec import SparseBitVector
from cal.codec import decode, encode, make_encoder
from cal.synapses import PlasticityParams, SynapseArray, kwta_activate


def V(idx, n):
    return SparseBitVector(idx, n)


class TestHardwire:
    def test_even_fanout(self):
        st = bc.hardwire(205, 1024, 2, seed=4)
        fo = st.array.fanout()
        assert fo.max() - fo.min() <= 1 and fo.min() >= 1
        assert np.all(st.array.fanin() == 2)

    def test_seeded(self):
        a, b = bc.hardwire(40, 64, 3, seed=9), bc.hardwire(40, 64, 3, seed=9)
        assert np.array_equal(a.array.dense_weights(), b.array.dense_weights())

    def test_small_exact(self):
        st = bc.hardwire(4, 2, 2, seed=0)
        assert st.array.fanout().tolist() == [1, 1, 1, 1]

    def test_no_duplicate_axons(self):
        st = bc.hardwire(10, 50, 4, seed=1)
        w = st.array.dense_weights()
        assert np.all((w > 0).sum(axis=0) == 4)

    def test_infeasible(self):
        with pytest.raises(ValueError):
            bc.hardwire(10, 2, 2, seed=0)


class TestForward:
    def test_gain_absent_equals_plain(self):
        st = bc.hardwire(30, 64, 3, seed=2)
        x = V([1, 5, 9, 20], 30)
        assert bc.forward(st, x) == kwta_activate(st.array, x, st.k_out)

    def test_disjoint_receptive_fields(self):
        arr = SynapseArray(6, 3, 1)
        arr.add(range(6), [0, 0, 1, 1, 2, 2], 1.0)
        st = bc.CorrelatorState(arr, 1, bc.HARDWIRED)
        assert list(bc.forward(st, V([2, 3], 6))) == [1]

    def test_never_more_than_k(self):
        st = bc.make_correlator(50, 100, 8)
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = SparseBitVector(np.sort(rng.choice(50, 6, replace=False)), 50)
            assert bc.forward(st, x).cardinality <= 8

    def test_distinct_bins_distinct_columns(self):
        enc = make_encoder(0, 1, 0.005, 5)
        st = bc.hardwire(enc.N, 1024, 2, seed=3, k_out=32)
        outs = {bc.forward(st, encode(enc, enc.value_of(b))) for b in range(enc.bins)}
        assert len(outs) == enc.bins

    def test_learning_from_empty_recruits(self):
        st = bc.make_correlator(20, 16, 2, params=PlasticityParams(0.1, balance=False, delta_AI=0.0, delta_IA=0.0))
        x = V([1, 2, 3], 20)
        y = bc.forward(st, x)
        assert y.cardinality == 1 and st.array.nnz == 3
        assert bc.forward(st, x, learn=False) == y

    def test_bad_gain(self):
        st = bc.make_correlator(4, 9, 3)
        with pytest.raises(ValueError):
            bc.forward(st, V([0], 4), gain=np.ones(3))
        with pytest.raises(ValueError):
            bc.forward(st, V([0], 4), gain=-np.ones(4))

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            bc.forward(bc.make_correlator(4, 9, 3), V([0], 5))


class TestReconstruct:
    def test_integer_round_trip(self):
        enc = make_encoder(0, 255, 1, 5, "integer")
        st = bc.hardwire(enc.N, 2048, 2, seed=1, k_out=45)
        for s in range(256):
            y = bc.forward(st, encode(enc, s))
            assert decode(enc, bc.reconstruct(st, y, enc.k)) == s

    def test_empty_is_empty(self):
        st = bc.hardwire(12, 8, 2, seed=0)
        assert bc.reconstruct(st, SparseBitVector.empty(8), 3).cardinality == 0

    def test_channels(self):
        st = bc.hardwire(12, 8, 3, seed=0)
        x = bc.reconstruct(st, V(range(8), 8), [2, 3], widths=[5, 7])
        parts = x.active
        assert (parts < 5).sum() == 2 and (parts >= 5).sum() == 3
        with pytest.raises(ValueError):
            bc.reconstruct(st, V([0], 8), 2, widths=[5, 5])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            bc.reconstruct(bc.hardwire(12, 8, 2, seed=0), V([0], 9), 3)


class TestCovariance:
    def test_empty(self):
        assert not bc.covariance(bc.make_correlator(5, 9, 3)).any()

    def test_single_dendrite(self):
        st = bc.make_correlator(6, 4, 2)
        st.array.add([2, 5], [1, 1], 0.5)
        cov = bc.covariance(st)
        for i, j in [(2, 5), (5, 2), (2, 2), (5, 5)]:
            assert cov[i, j] == 1
        assert cov.sum() == 4

    def test_csv_pgm(self, tmp_path):
        cov = np.arange(9).reshape(3, 3)
        bc.write_covariance_csv(tmp_path / "c.csv", cov)
        bc.write_covariance_pgm(tmp_path / "c.pgm", cov)
        assert np.array_equal(np.loadtxt(tmp_path / "c.csv", delimiter=","), cov)
        assert (tmp_path / "c.pgm").read_text().startswith("P2\n3 3\n255")
