"""Exact neighbor queries against a sorted-pairs oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairkm.core import Dataset, ValidityError
from fairkm.neighbors import knn, knn_batch
from synthetic import random_dataset


def brute_neighbors(X, q, k):
    """All pairs, python sort on (distance, index), self excluded."""
    pairs = []
    for p in range(X.shape[0]):
        if p == q:
            continue
        d2 = sum((X[q, j] - X[p, j]) ** 2 for j in range(X.shape[1]))
        pairs.append((d2, p))
    pairs.sort()
    return [p for _, p in pairs[:k]], [d for d, _ in pairs[:k]]


class TestKnn:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 8))
    def test_against_sorted_pairs(self, seed, k):
        rng = np.random.default_rng(seed)
        data = random_dataset(rng, n=40, d=3)
        for q in [0, 17, 39]:
            got = knn(data, q, k)
            idx, d2 = brute_neighbors(data.features, q, k)
            assert got.indices.tolist() == idx
            np.testing.assert_allclose(got.sq_distances, d2, rtol=1e-12, atol=0)

    def test_distance_ties_take_smaller_index(self):
        X = np.array([[0.0], [0.0], [0.0], [1.0]])
        data = Dataset(X, np.array([0, 1, 0, 1]), 2)
        assert knn(data, 3, 2).indices.tolist() == [0, 1]

    def test_self_excluded_by_identity_not_distance(self):
        # point 2 duplicates 0 and 1; its neighbors are the duplicates
        X = np.array([[0.0], [0.0], [0.0], [1.0]])
        data = Dataset(X, np.array([0, 1, 0, 1]), 2)
        got = knn(data, 2, 2)
        assert got.indices.tolist() == [0, 1]
        assert got.sq_distances.tolist() == [0.0, 0.0]
        assert knn(data, 0, 2).indices.tolist() == [1, 2]

    def test_neighbors_sorted_nearest_first(self):
        rng = np.random.default_rng(3)
        data = random_dataset(rng, n=30, d=2)
        got = knn(data, 11, 10)
        assert (np.diff(got.sq_distances) >= 0).all()

    def test_batch_matches_singles_across_blocks(self):
        rng = np.random.default_rng(4)
        data = random_dataset(rng, n=600, d=2)
        queries = list(range(600))  # spans more than one 512-row block
        batch = knn_batch(data, queries, 5)
        for q in [0, 511, 512, 599]:
            single = knn(data, q, 5)
            assert batch[q].indices.tolist() == single.indices.tolist()
            assert batch[q].sq_distances.tolist() == single.sq_distances.tolist()

    def test_k_equals_n_minus_one(self):
        rng = np.random.default_rng(6)
        data = random_dataset(rng, n=9, d=2)
        got = knn(data, 4, 8)
        assert sorted(got.indices.tolist()) == [0, 1, 2, 3, 5, 6, 7, 8]

    def test_k_out_of_range(self):
        rng = np.random.default_rng(7)
        data = random_dataset(rng, n=10, d=2)
        with pytest.raises(ValidityError):
            knn(data, 0, 0)
        with pytest.raises(ValidityError):
            knn(data, 0, 10)

    def test_bad_query_index(self):
        rng = np.random.default_rng(8)
        data = random_dataset(rng, n=10, d=2)
        with pytest.raises(ValidityError):
            knn_batch(data, [0, 10], 3)
        with pytest.raises(ValidityError):
            knn_batch(data, [-1], 3)

    def test_empty_query_list(self):
        rng = np.random.default_rng(9)
        data = random_dataset(rng, n=10, d=2)
        assert knn_batch(data, [], 3) == []
