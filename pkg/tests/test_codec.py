import numpy as np
import pytest

from cal.bitvec import SparseBitVector
from cal.codec import (
    NoPrediction,
    char_encoder,
    decode,
    decode_table,
    encode,
    ingest_frame,
    make_encoder,
    read_pbm,
    write_pbm,
)


class TestEncoderSpec:
    def test_lissajous_width(self):
        e = make_encoder(-1, 1, 0.01, 5)
        assert (e.N, e.bins) == (205, 201)

    def test_popeq_width(self):
        assert make_encoder(0, 1, 0.005, 5).N == 205

    def test_integer_width(self):
        e = make_encoder(0, 255, 1, 5, "integer")
        assert (e.N, e.bins, e.d) == (1280, 256, 5)

    def test_invalid(self):
        with pytest.raises(ValueError):
            make_encoder(1, 0, 0.1, 5)
        with pytest.raises(ValueError):
            make_encoder(0, 1, 0, 5)
        with pytest.raises(ValueError):
            make_encoder(0, 1, 0.1, 5, d=6)
        with pytest.raises(ValueError):
            make_encoder(0, 10, 1, 5, "integer", d=1)
        with pytest.raises(ValueError):
            make_encoder(0, 1, 0.1, 5, "complex")

    def test_char_encoder_covers_text(self):
        e = char_encoder("az ", 5)
        assert e.s_min == ord(" ") and e.s_max == ord("z")


class TestEncode:
    def test_first_bin(self):
        e = make_encoder(0, 1, 0.1, 5)
        assert list(encode(e, 0.0)) == [0, 1, 2, 3, 4]

    def test_midpoint(self):
        e = make_encoder(-1, 1, 0.01, 5)
        assert list(encode(e, 0.0)) == [100, 101, 102, 103, 104]

    def test_adjacent_overlap(self):
        e = make_encoder(-1, 1, 0.01, 5)
        a, b = encode(e, 0.3), encode(e, 0.31)
        assert len(set(a) & set(b)) == 4

    def test_half_bin_margin(self):
        e = make_encoder(0, 1, 0.1, 5)
        assert encode(e, 1.04).cardinality == 5
        with pytest.raises(ValueError):
            encode(e, 1.2)
        with pytest.raises(ValueError):
            encode(e, -0.06)


class TestDecode:
    def test_round_trip(self):
        e = make_encoder(-1, 1, 0.01, 5)
        for s in np.random.default_rng(0).uniform(-1, 1, 500):
            assert abs(decode(e, encode(e, s)) - s) <= e.r / 2 + 1e-12

    @staticmethod
    def _perturbations(e):
        for b in range(e.bins):
            x = encode(e, e.value_of(b))
            for bit in x.active.tolist():
                for moved in (bit - 1, bit + 1):
                    if 0 <= moved < e.N and moved not in x:
                        yield b, SparseBitVector(sorted(set(x.active.tolist()) - {bit} | {moved}), e.N)

    def test_single_bit_perturbation_integer(self):
        # d = k: a moved bit keeps k-1 bits of its own bin and at most one of a neighbour
        e = make_encoder(0, 20, 1, 5, "integer")
        for b, y in self._perturbations(e):
            assert decode(e, y) == e.value_of(b)

    def test_single_bit_perturbation_real(self):
        # d = 1: moving an end bit ties two adjacent bins; decode must be the
        # brute-force best overlap (lowest on ties), never more than one bin away
        e = make_encoder(0, 1, 0.05, 5)
        for b, y in self._perturbations(e):
            scores = [len(set(y) & set(encode(e, e.value_of(c)))) for c in range(e.bins)]
            best = scores.index(max(scores))
            got = decode(e, y)
            assert got == pytest.approx(e.value_of(best))
            assert abs(got - e.value_of(b)) <= e.r + 1e-12

    def test_empty_is_no_prediction(self):
        e = make_encoder(0, 1, 0.1, 5)
        with pytest.raises(NoPrediction):
            decode(e, SparseBitVector.empty(e.N))

    def test_tie_goes_low(self):
        e = make_encoder(0, 10, 1, 2, "integer")
        x = SparseBitVector([0, 2], e.N)  # one bit each of bins 0 and 1
        assert decode(e, x) == 0

    def test_table_matches_encode(self):
        e = make_encoder(0, 1, 0.1, 3)
        t = decode_table(e).toarray()
        for b in range(e.bins):
            assert np.flatnonzero(t[:, b]).tolist() == encode(e, e.value_of(b)).active.tolist()

    def test_length_mismatch(self):
        e = make_encoder(0, 1, 0.1, 3)
        with pytest.raises(ValueError):
            decode(e, SparseBitVector([0], e.N + 1))


class TestDigitizationFloor:
    def test_uniform_rms(self):
        e = make_encoder(0, 1, 0.01, 5)
        s = np.random.default_rng(5).uniform(0, 1, 100_000)
        err = np.array([decode(e, encode(e, v)) for v in s]) - s
        floor = e.r / np.sqrt(12)
        assert abs(np.sqrt(np.mean(err ** 2)) - floor) <= 0.05 * floor
        assert abs(err.mean()) < 1e-4


class TestImages:
    def test_column_major(self):
        img = np.zeros((2, 2), bool)
        img[0, 1] = True
        assert list(ingest_frame(img)) == [2]

    def test_blank(self):
        assert ingest_frame(np.zeros((3, 4), bool)).cardinality == 0

    def test_diagonal(self):
        assert list(ingest_frame(np.eye(3, dtype=bool))) == [0, 4, 8]

    def test_pbm_round_trip(self, tmp_path):
        img = np.random.default_rng(1).random((5, 7)) > 0.5
        write_pbm(tmp_path / "a.pbm", img)
        assert np.array_equal(read_pbm(tmp_path / "a.pbm"), img)

    def test_pbm_rejects_other_formats(self, tmp_path):
        (tmp_path / "b.pbm").write_text("P4\n1 1\n0\n")
        with pytest.raises(ValueError):
            read_pbm(tmp_path / "b.pbm")
