import numpy as np
import pytest

from cal import correlator as bc
from cal.bitvec import SparseBitVector, union_window
from cal.codec import encode, make_encoder
from cal.region import (
    ApicalConfig,
    CorrelatorConfig,
    Region,
    RegionConfig,
    SMConfig,
    apical_gain,
    predict_scalar,
)
from cal.sequence_memory import SequenceMemory, SMGeometry
from cal.synapses import SynapseArray


def V(idx, n):
    return SparseBitVector(idx, n)


def hardwired(enc, cols=64, k=8, seed=0, **kw):
    cfg = RegionConfig(SMGeometry(cols, 4, 2), enc.N, correlator=CorrelatorConfig(mode="hardwired", fanin=2, k=k),
                       channels=[(enc.N, enc.k)], seed=seed, **kw)
    return Region(cfg, "R", [enc])


class TestApicalGain:
    def test_no_feedback_is_neutral(self):
        W = SynapseArray(3, 5)
        W.add([0], [1], 0.5)
        assert np.all(apical_gain(V([], 3), W) == 1.0)

    def test_single_synapse(self):
        W = SynapseArray(2, 6)
        W.add([1], [3], 0.5)
        g = apical_gain(V([1], 2), W)
        assert g[3] == pytest.approx(1.5, abs=1e-4) and g.sum() == pytest.approx(6.5, abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apical_gain(V([0], 4), SynapseArray(3, 5))


class TestStep:
    def test_degenerate_pipeline_equals_parts(self):
        enc = make_encoder(0, 1, 0.05, 5)
        region = hardwired(enc, seed=4)
        corr = bc.hardwire(enc.N, 64, 2, int(np.random.default_rng(4).integers(0, 2**63, size=3)[0]), 8)
        sm = SequenceMemory(SMGeometry(64, 4, 2), 8, region.sm.params, seed=int(
            np.random.default_rng(4).integers(0, 2**63, size=3)[1]))
        rng = np.random.default_rng(1)
        for _ in range(60):
            x = encode(enc, float(rng.integers(0, 21)) * 0.05)
            out = region.step([x])
            y = bc.forward(corr, x)
            v, z, a = sm.step(y)
            assert (out.y, out.v, out.z, out.a) == (y, v, z, a)

    def test_pool_window(self):
        enc = make_encoder(0, 10, 1, 3, "integer")
        region = hardwired(enc, pool_window=3)
        xs = [encode(enc, s) for s in (1, 4, 7, 9)]
        outs = [region.step([x]) for x in xs]
        assert outs[0].x == xs[0]
        assert outs[1].x == union_window(xs[:2])
        assert outs[3].x == union_window(xs[1:4])
        assert outs[3].x.cardinality <= 3 * 3

    def test_width_mismatch(self):
        enc = make_encoder(0, 10, 1, 3, "integer")
        with pytest.raises(ValueError):
            hardwired(enc).step([V([0], enc.N + 1)])

    def test_outputs_respect_invariants(self):
        enc = make_encoder(0, 1, 0.01, 5)
        region = hardwired(enc, cols=128, k=11)
        for t in range(100):
            out = region.step([encode(enc, (t % 17) / 17)])
            assert out.y.cardinality <= 11
            assert set((out.v.active // 4).tolist()) <= set(out.y.active.tolist())

    def test_unit_gain_equals_no_feedback(self):
        enc = make_encoder(0, 1, 0.05, 5)
        # frozen apical array with no synapses: g = 1 everywhere
        a = hardwired(enc, seed=2, feedback_width=6, apical=ApicalConfig(learning=False))
        b = hardwired(enc, seed=2)
        for t in range(30):
            x = encode(enc, (t % 7) * 0.1)
            assert a.step([x], V([t % 6], 6)).y == b.step([x]).y

    def test_feedback_learning_grows_apical_synapses(self):
        enc = make_encoder(0, 1, 0.05, 5)
        region = hardwired(enc, feedback_width=6)
        for t in range(10):
            region.step([encode(enc, 0.5)], V([2], 6))
        assert region.apical.nnz > 0
        assert np.all(region.apical.axon == 2)

    def test_reset_keeps_synapses(self):
        enc = make_encoder(0, 3, 1, 5, "integer")
        region = hardwired(enc)
        for t in range(40):
            region.step([encode(enc, t % 4)])
        nnz = region.sm.W.nnz
        region.reset()
        assert region.sm.W.nnz == nnz and region.y_prev is None and not region.pool


class TestPredictScalar:
    def test_empty(self):
        enc = make_encoder(0, 1, 0.05, 5)
        region = hardwired(enc)
        assert predict_scalar(region, [enc], V([], region.cells)) == [None]

    def test_two_channels(self):
        e1, e2 = make_encoder(0, 7, 1, 5, "integer"), make_encoder(0, 3, 1, 5, "integer")
        cfg = RegionConfig(SMGeometry(512, 2, 1), e1.N + e2.N,
                           correlator=CorrelatorConfig(mode="hardwired", fanin=2, k=32),
                           sequence_memory=SMConfig(enabled=False),
                           channels=[(e1.N, e1.k), (e2.N, e2.k)])
        region = Region(cfg, "R", [e1, e2])
        out = region.step([encode(e1, 6), encode(e2, 1)])
        assert out.predictions == [6.0, 1.0]

    def test_decoder_count(self):
        enc = make_encoder(0, 1, 0.05, 5)
        with pytest.raises(ValueError):
            predict_scalar(hardwired(enc), [enc, enc], V([0], 256))


class TestConfig:
    def test_invalid(self):
        g = SMGeometry(8, 1, 1)
        with pytest.raises(ValueError):
            RegionConfig(g, 10, pool_window=0)
        with pytest.raises(ValueError):
            RegionConfig(g, 0)
        with pytest.raises(ValueError):
            RegionConfig(g, 10, channels=[(4, 1)])

    def test_default_k(self):
        assert RegionConfig(SMGeometry(1024, 1, 1), 10).k_out == 32
