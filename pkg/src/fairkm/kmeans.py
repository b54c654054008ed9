"""Lloyd's K-means with deterministic seeding and empty-cluster repair.

Initial centroids are K distinct data rows drawn from a seeded permutation,
so a (data, K, seed) triple always yields the same run. Assignment ties go
to the lowest cluster id; a cluster that empties mid-run is re-seeded on the
point worst served by the current centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import Assignment, Dataset, ValidityError
from .metrics import ss_decomposition


@dataclass(frozen=True)
class KMeansResult:
    """Final partition plus the per-iteration objective trace.

    ``objective`` is the within-cluster sum of squares of the final
    assignment around exact cluster means; ``objective_history`` holds one
    value per assignment the run passed through, non-increasing.
    """

    assignment: Assignment
    centroids: np.ndarray
    iterations: int
    objective: float
    objective_history: tuple


def init_centroids(data: Dataset, K: int, seed: int) -> np.ndarray:
    """K distinct data rows, chosen by a seeded permutation scan."""
    n = data.n
    if not 2 <= K <= n:
        raise ValidityError(f"cluster count must satisfy 2 <= K <= {n}, got {K}")
    rng = np.random.default_rng(seed)
    seen = set()
    rows = []
    for p in rng.permutation(n):
        key = data.features[p].tobytes()
        if key in seen:
            continue
        seen.add(key)
        rows.append(p)
        if len(rows) == K:
            return data.features[np.array(rows)].copy()
    raise ValidityError(f"need {K} distinct points but the data has only {len(rows)}")


def assign_points(data: Dataset, centroids: np.ndarray) -> Assignment:
    """Nearest-centroid labels; ties take the lowest centroid id.

    The result may contain empty clusters; callers that cannot tolerate
    them repair or reject via the Assignment helpers.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.ndim != 2 or centroids.shape[1] != data.d:
        raise ValidityError(f"centroids must be (K, {data.d})")
    labels = cdist(data.features, centroids, "sqeuclidean").argmin(axis=1)
    return Assignment(labels, centroids.shape[0])


def update_centroids(data: Dataset, assignment: Assignment) -> np.ndarray:
    """Exact per-cluster means. Every cluster must have members."""
    assignment.validate_nonempty()
    labels = assignment.cluster_of
    K = assignment.K
    sizes = np.bincount(labels, minlength=K).astype(np.float64)
    out = np.empty((K, data.d))
    for j in range(data.d):
        out[:, j] = np.bincount(labels, weights=data.features[:, j], minlength=K) / sizes
    return out


def _repair_empties(data: Dataset, centroids: np.ndarray, labels: np.ndarray):
    """Re-seed each empty cluster on a far-out point from a multi-member cluster."""
    K = centroids.shape[0]
    attempts = 0
    sizes = np.bincount(labels, minlength=K)
    while (sizes == 0).any():
        attempts += 1
        if attempts > 2 * K:
            raise ValidityError("could not repair empty clusters; too few distinct points")
        empty = int(np.flatnonzero(sizes == 0)[0])
        d2min = cdist(data.features, centroids, "sqeuclidean").min(axis=1)
        eligible = sizes[labels] >= 2  # never strand a singleton cluster
        if not eligible.any():
            raise ValidityError("could not repair empty clusters; too few distinct points")
        donor = int(np.argmax(np.where(eligible, d2min, -np.inf)))
        centroids[empty] = data.features[donor]
        labels = cdist(data.features, centroids, "sqeuclidean").argmin(axis=1)
        sizes = np.bincount(labels, minlength=K)
    return centroids, labels


def _partition_ssw(data: Dataset, labels: np.ndarray, K: int) -> float:
    return ss_decomposition(data, Assignment(labels, K))[0]


def run_kmeans(data: Dataset, K: int, seed: int = 0, max_iters: int = 300) -> KMeansResult:
    """Alternate assignment and mean updates until labels stop changing."""
    if max_iters < 1:
        raise ValidityError("max_iters must be at least 1")
    centroids = init_centroids(data, K, seed)
    labels = cdist(data.features, centroids, "sqeuclidean").argmin(axis=1)
    centroids, labels = _repair_empties(data, centroids, labels)
    history = [_partition_ssw(data, labels, K)]
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        centroids = update_centroids(data, Assignment(labels, K))
        new = cdist(data.features, centroids, "sqeuclidean").argmin(axis=1)
        centroids, new = _repair_empties(data, centroids, new)
        if np.array_equal(new, labels):
            break
        labels = new
        history.append(_partition_ssw(data, labels, K))
    assignment = Assignment(labels, K)
    return KMeansResult(
        assignment=assignment,
        centroids=update_centroids(data, assignment),
        iterations=iterations,
        objective=history[-1],
        objective_history=tuple(history),
    )
