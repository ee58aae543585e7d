import numpy as np
import pytest

from cal.bitvec import (
    DenseExcitation,
    SparseBitVector,
    cardinality,
    concat,
    jaccard,
    overlap,
    split,
    union_window,
)


def V(idx, n):
    return SparseBitVector(idx, n)


class TestConstruction:
    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            V([3, 1], 8)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            V([1, 1], 8)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            V([8], 8)
        with pytest.raises(ValueError):
            V([-1], 8)

    def test_from_unsorted_and_mask(self):
        v = SparseBitVector.from_unsorted([5, 1, 5, 3], 8)
        assert list(v) == [1, 3, 5]
        assert SparseBitVector.from_mask(v.to_mask()) == v

    def test_parse_roundtrip(self):
        v = V([0, 4, 9], 12)
        assert SparseBitVector.parse(str(v)) == v
        with pytest.raises(ValueError):
            SparseBitVector.parse("garbage")

    def test_dense_excitation_rejects_nan(self):
        with pytest.raises(ValueError):
            DenseExcitation([1.0, np.nan])


class TestCardinality:
    def test_empty(self):
        assert cardinality(SparseBitVector.empty(8)) == 0

    def test_direct_count(self):
        assert cardinality(V([0, 3, 7], 8)) == 3

    def test_union(self):
        assert cardinality(V([0, 1], 4) | V([1, 2], 4)) == 3


class TestJaccard:
    def test_identity(self):
        a = V([1, 5], 8)
        assert jaccard(a, a) == 1.0

    def test_disjoint(self):
        assert jaccard(V([1], 8), V([2], 8)) == 0.0

    def test_formula(self):
        assert jaccard(V([1, 2, 3, 4], 8), V([3, 4, 5, 6], 8)) == pytest.approx(2 / 6)

    def test_both_empty_is_one(self):
        assert jaccard(SparseBitVector.empty(4), SparseBitVector.empty(4)) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            jaccard(V([1], 4), V([1], 5))
        with pytest.raises(ValueError):
            overlap(V([1], 4), V([1], 5))


class TestConcatSplit:
    def test_two(self):
        assert concat([V([0], 2), V([0], 2)]) == V([0, 2], 4)

    def test_single_is_identity(self):
        v = V([1, 3], 5)
        assert concat([v]) == v

    def test_three(self):
        assert concat([V([2], 3), V([0], 3), V([1], 3)]) == V([2, 3, 7], 9)

    def test_empty_list(self):
        with pytest.raises(ValueError):
            concat([])

    def test_split_recovers(self):
        parts = [V([2], 3), V([], 4), V([0, 4], 5)]
        assert split(concat(parts), [3, 4, 5]) == parts

    def test_split_bad_lengths(self):
        with pytest.raises(ValueError):
            split(V([1], 6), [2, 3])


class TestUnionWindow:
    def test_or(self):
        assert union_window([V([1, 2], 5), V([2, 3], 5)]) == V([1, 2, 3], 5)

    def test_identity_element(self):
        v = V([0, 4], 5)
        assert union_window([v, SparseBitVector.empty(5)]) == v

    def test_idempotent(self):
        v = V([0, 4], 5)
        assert union_window([v, v, v]) == v

    def test_errors(self):
        with pytest.raises(ValueError):
            union_window([])
        with pytest.raises(ValueError):
            union_window([V([1], 4), V([1], 5)])
