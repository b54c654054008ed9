"""Exact k-nearest-neighbor queries over the dataset's own points.

Brute force with blocked distance matrices: exact answers, bounded memory.
Ties on distance resolve to the smaller point index, and the query point
itself is never its own neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import Dataset, ValidityError

# rows of the distance matrix computed per block; caps peak memory at
# roughly BLOCK * n * 8 bytes without changing any result
BLOCK = 512


@dataclass(frozen=True)
class NeighborSet:
    """Indices of the k nearest points and their squared distances, nearest first."""

    indices: np.ndarray
    sq_distances: np.ndarray


def _validate_k(k, n):
    if not 1 <= k < n:
        raise ValidityError(f"neighbor count must satisfy 1 <= k < {n}, got {k}")


def knn_batch(data: Dataset, query_indices, k: int) -> list[NeighborSet]:
    """NeighborSet for each query index, in query order."""
    X = data.features
    n = X.shape[0]
    _validate_k(k, n)
    queries = np.asarray(query_indices, dtype=np.int64)
    if queries.size and (queries.min() < 0 or queries.max() >= n):
        raise ValidityError(f"query indices must lie in [0, {n})")
    out = [None] * queries.size
    for start in range(0, queries.size, BLOCK):
        chunk = queries[start : start + BLOCK]
        d2 = cdist(X[chunk], X, "sqeuclidean")
        # stable sort makes equal distances fall back to index order
        order = np.argsort(d2, axis=1, kind="stable")[:, : k + 1]
        for row, q in enumerate(chunk):
            picks = order[row]
            picks = picks[picks != q][:k] if q in picks else picks[:k]
            out[start + row] = NeighborSet(
                indices=picks.copy(), sq_distances=d2[row, picks].copy()
            )
    return out


def knn(data: Dataset, query_index: int, k: int) -> NeighborSet:
    """Nearest neighbors of one point; see knn_batch."""
    return knn_batch(data, [query_index], k)[0]
