"""Fairness and cluster-quality measures.

Fairness of a clustering is the size-weighted sum over clusters of the L1
distance between each cluster's sensitive-group mix and the population mix;
0 means every cluster mirrors the population. Quality is the share of total
scatter explained by the between-cluster part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Assignment, ClusterStats, Dataset, ValidityError, group_count_matrix


@dataclass(frozen=True)
class FairnessReport:
    """Overall fairness value plus its per-cluster decomposition.

    ``per_cluster[i]`` is (weight, discrepancy): the cluster's share of all
    points and its L1 gap to the population mix. The value is their dot
    product.
    """

    value: float
    per_cluster: tuple
    population: tuple


def _fairness_parts(counts: np.ndarray, n: int):
    """(value, weights, discrepancies, population) from a (K, G) count matrix.

    Shared with the adjustment engine so a fairness value quoted mid-switch
    is bit-identical to one recomputed from the final labels.
    """
    sizes = counts.sum(axis=1)
    pop = counts.sum(axis=0) / n
    weights = sizes / n
    discrepancies = np.abs(counts / sizes[:, None] - pop).sum(axis=1)
    return float((weights * discrepancies).sum()), weights, discrepancies, pop


def fairness_index(data: Dataset, assignment: Assignment) -> FairnessReport:
    """Size-weighted L1 deviation of cluster group mixes from the population."""
    assignment.validate_nonempty()
    counts = group_count_matrix(data, assignment)
    value, weights, discrepancies, pop = _fairness_parts(counts, data.n)
    return FairnessReport(
        value=value,
        per_cluster=tuple(zip(weights.tolist(), discrepancies.tolist())),
        population=tuple(pop.tolist()),
    )


def balance(stats: ClusterStats, numerator_group: int, denominator_group: int) -> float:
    """Count ratio of two sensitive groups inside one cluster.

    x/0 with x > 0 is +inf; the 0/0 ratio is defined as 1 (an empty slice is
    vacuously balanced). Both conventions keep the comparison against the
    population ratio total.
    """
    if numerator_group == denominator_group:
        raise ValidityError("balance needs two distinct groups")
    num = int(stats.group_counts[numerator_group])
    den = int(stats.group_counts[denominator_group])
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def gini(props) -> float:
    """Impurity sum p_j * (1 - p_j) of a proportion vector.

    0 for a pure neighborhood, approaching 1 - 1/m as m labels even out.
    """
    p = np.asarray(props, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidityError("proportions must form a non-empty vector")
    if (p < 0).any():
        raise ValidityError("proportions must be non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValidityError(f"proportions must sum to 1, got {float(p.sum())!r}")
    return float((p * (1.0 - p)).sum())


def ss_decomposition(data: Dataset, assignment: Assignment):
    """Within-, between-, and total sum of squares around the exact means.

    Computed independently from their definitions, not via the identity
    ss_t = ss_w + ss_b, so the identity stays available as a cross-check.
    """
    assignment.validate_nonempty()
    X = data.features
    labels = assignment.cluster_of
    K = assignment.K
    sizes = np.bincount(labels, minlength=K).astype(np.float64)
    centroids = np.empty((K, X.shape[1]))
    for j in range(X.shape[1]):
        centroids[:, j] = np.bincount(labels, weights=X[:, j], minlength=K) / sizes
    ss_w = float(((X - centroids[labels]) ** 2).sum())
    grand = X.mean(axis=0)
    ss_b = float((sizes[:, None] * (centroids - grand) ** 2).sum())
    ss_t = float(((X - grand) ** 2).sum())
    return ss_w, ss_b, ss_t


def cluster_quality_kappa(data: Dataset, assignment: Assignment) -> float:
    """Fraction of total scatter captured between clusters, in [0, 1]."""
    _, ss_b, ss_t = ss_decomposition(data, assignment)
    if ss_t == 0.0:
        raise ValidityError("all points identical, quality ratio undefined")
    return ss_b / ss_t
