"""Data model and CSV ingestion shared by the clustering and fairness stages.

A :class:`Dataset` couples an immutable feature matrix with one sensitive
group label per point. Downstream stages treat it as read-only and return
new objects instead of mutating their inputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

HEURISTICS = ("near_foreign", "gini", "none")


class DataError(ValueError):
    """Base class for problems with user-supplied data."""


class SchemaError(DataError):
    """A required column is missing or the header is unusable."""


class ParseError(DataError):
    """A cell or row that cannot be parsed; the message carries row/column context."""


class ValidityError(DataError):
    """Input that parsed fine but violates a semantic requirement."""


def _frozen_array(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """n points with d features each, plus a sensitive group label per point.

    ``sensitive`` holds dense integer labels in ``[0, group_count)``; every
    group must occur at least once and every feature value must be finite.
    ``group_names``, ``feature_names`` and ``dropped_rows`` are ingestion
    metadata used when reporting; they do not affect any computation.
    """

    features: np.ndarray
    sensitive: np.ndarray
    group_count: int
    point_ids: tuple | None = None
    group_names: tuple | None = None
    feature_names: tuple | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        feats = _frozen_array(self.features, np.float64)
        labels = _frozen_array(self.sensitive, np.int64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "sensitive", labels)
        if feats.ndim != 2:
            raise ValidityError("features must be a 2-D matrix")
        n, d = feats.shape
        if n < 2 or d < 1:
            raise ValidityError(f"need at least 2 points and 1 feature, got {n}x{d}")
        if not np.isfinite(feats).all():
            raise ValidityError("features contain NaN or infinite values")
        if labels.ndim != 1 or labels.shape[0] != n:
            raise ValidityError("sensitive labels must be one integer per point")
        g = int(self.group_count)
        object.__setattr__(self, "group_count", g)
        if g < 2:
            raise ValidityError(f"need at least 2 sensitive groups, got {g}")
        if labels.min() < 0 or labels.max() >= g:
            raise ValidityError(f"sensitive labels must lie in [0, {g})")
        present = np.bincount(labels, minlength=g) > 0
        if not present.all():
            missing = np.flatnonzero(~present).tolist()
            raise ValidityError(f"sensitive groups never observed: {missing}")
        for attr, size in (("point_ids", n), ("group_names", g), ("feature_names", d)):
            value = getattr(self, attr)
            if value is not None:
                value = tuple(value)
                if len(value) != size:
                    raise ValidityError(f"{attr} must have length {size}, got {len(value)}")
                object.__setattr__(self, attr, value)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class Assignment:
    """Cluster id in [0, K) for every point.

    Empty clusters are representable: the K-means loop produces and repairs
    them mid-iteration. Consumers that need the stronger guarantee call
    :meth:`validate_nonempty`.
    """

    cluster_of: np.ndarray
    K: int

    def __post_init__(self):
        ids = _frozen_array(self.cluster_of, np.int64)
        object.__setattr__(self, "cluster_of", ids)
        object.__setattr__(self, "K", int(self.K))
        if ids.ndim != 1 or ids.shape[0] < 1:
            raise ValidityError("cluster_of must be a non-empty 1-D vector")
        if self.K < 1:
            raise ValidityError(f"cluster count must be >= 1, got {self.K}")
        if ids.min() < 0 or ids.max() >= self.K:
            raise ValidityError(f"cluster ids must lie in [0, {self.K})")

    @property
    def n(self) -> int:
        return self.cluster_of.shape[0]

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.K)

    def empty_clusters(self) -> list[int]:
        return np.flatnonzero(self.cluster_sizes() == 0).tolist()

    def validate_nonempty(self):
        empty = self.empty_clusters()
        if empty:
            raise ValidityError(f"clusters without members: {empty}")


@dataclass(frozen=True, eq=False)
class ClusterStats:
    """Size, centroid and per-group member counts of one cluster."""

    size: int
    centroid: np.ndarray
    group_counts: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    """Tunables for one clustering-plus-adjustment run.

    Holding every knob in one value is the reproducibility contract: two runs
    with equal (data, config) must produce identical results.
    """

    K: int
    heuristic: str = "near_foreign"
    knn_k: int = 10
    beta0: float = 0.10
    seed: int = 0
    standardize: bool = True
    max_kmeans_iters: int = 300
    max_pair_rounds: int | None = None
    literal_switch: bool = False

    def validate_for(self, n: int):
        """Check every bound that depends on the dataset size n."""
        if self.heuristic not in HEURISTICS:
            raise ValidityError(f"heuristic must be one of {HEURISTICS}, got {self.heuristic!r}")
        if not 2 <= self.K <= n:
            raise ValidityError(f"cluster count must satisfy 2 <= K <= {n}, got {self.K}")
        if not 1 <= self.knn_k < n:
            raise ValidityError(f"neighborhood size must satisfy 1 <= knn_k < {n}, got {self.knn_k}")
        if not 0.0 < self.beta0 < 1.0:
            raise ValidityError(f"balance tolerance must lie in (0, 1), got {self.beta0}")
        if self.max_kmeans_iters < 1:
            raise ValidityError("max_kmeans_iters must be at least 1")
        if self.max_pair_rounds is not None and self.max_pair_rounds < 0:
            raise ValidityError("max_pair_rounds must be >= 0")

    def pair_rounds(self) -> int:
        if self.max_pair_rounds is not None:
            return self.max_pair_rounds
        return self.K * (self.K - 1) // 2


def load_csv(path, sensitive_column, id_column=None) -> Dataset:
    """Read an RFC-4180-style CSV with a header row into a Dataset.

    The sensitive column is mapped to dense integer labels in order of first
    appearance. A feature column whose cells all parse as numbers stays
    numeric; any other column is one-hot encoded, one 0/1 column per distinct
    value in order of first appearance. Rows containing empty cells are
    dropped and counted in ``Dataset.dropped_rows``.
    """
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot open: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        raw_rows = [(reader.line_num, row) for row in reader]

    if len(set(header)) != len(header):
        dupes = sorted({name for name in header if header.count(name) > 1})
        raise SchemaError(f"{path}: duplicate column names {dupes}")

    def _column_index(name):
        if name not in header:
            raise SchemaError(f"{path}: column {name!r} not found in header {header}")
        return header.index(name)

    s_idx = _column_index(sensitive_column)
    id_idx = _column_index(id_column) if id_column is not None else None
    feature_idx = [i for i in range(len(header)) if i != s_idx and i != id_idx]
    if not feature_idx:
        raise SchemaError(f"{path}: no feature columns besides {sensitive_column!r}")

    kept = []
    dropped = 0
    for lineno, row in raw_rows:
        if not row:
            continue  # blank line, not a record
        if len(row) != len(header):
            raise ParseError(
                f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        if any(cell.strip() == "" for cell in row):
            dropped += 1
            continue
        kept.append((lineno, row))
    if len(kept) < 2:
        raise ValidityError(
            f"{path}: only {len(kept)} usable rows after dropping {dropped} with missing cells"
        )

    group_levels: dict[str, int] = {}
    labels = [group_levels.setdefault(row[s_idx], len(group_levels)) for _, row in kept]
    if len(group_levels) < 2:
        only = next(iter(group_levels))
        raise ValidityError(
            f"{path}: column {sensitive_column!r} has the single value {only!r}; "
            "need at least 2 distinct groups"
        )

    def _parses_as_number(cell):
        try:
            float(cell)
        except ValueError:
            return False
        return True

    columns = []
    names = []
    for c in feature_idx:
        cells = [row[c] for _, row in kept]
        if all(_parses_as_number(cell) for cell in cells):
            values = []
            for (lineno, _), cell in zip(kept, cells):
                value = float(cell)
                if not math.isfinite(value):
                    raise ParseError(
                        f"{path}: line {lineno}, column {header[c]!r}: non-finite value {cell!r}"
                    )
                values.append(value)
            columns.append(values)
            names.append(header[c])
        else:
            levels: dict[str, int] = {}
            for cell in cells:
                levels.setdefault(cell, len(levels))
            for level in levels:
                columns.append([1.0 if cell == level else 0.0 for cell in cells])
                names.append(f"{header[c]}={level}")

    point_ids = tuple(row[id_idx] for _, row in kept) if id_idx is not None else None
    return Dataset(
        features=np.array(columns, dtype=np.float64).T,
        sensitive=np.array(labels, dtype=np.int64),
        group_count=len(group_levels),
        point_ids=point_ids,
        group_names=tuple(group_levels),
        feature_names=tuple(names),
        dropped_rows=dropped,
    )


def standardize(data: Dataset) -> Dataset:
    """Return a copy with each feature column at mean 0 and population sd 1.

    Constant columns become all-zeros instead of being divided. Applying the
    transform twice is a no-op up to rounding.
    """
    X = data.features
    constant = (X == X[0]).all(axis=0)
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    scale = np.where((sd == 0.0) | constant, 1.0, sd)
    Z = (X - mean) / scale
    Z[:, constant] = 0.0
    return replace(data, features=Z)


def group_proportions(data: Dataset) -> np.ndarray:
    """Fraction of all points in each sensitive group; entries sum to 1."""
    counts = np.bincount(data.sensitive, minlength=data.group_count)
    return counts / data.n


def group_count_matrix(data: Dataset, assignment: Assignment) -> np.ndarray:
    """(K, G) matrix of sensitive-group member counts per cluster."""
    if assignment.n != data.n:
        raise ValidityError(
            f"assignment covers {assignment.n} points, dataset has {data.n}"
        )
    K, G = assignment.K, data.group_count
    flat = assignment.cluster_of * G + data.sensitive
    return np.bincount(flat, minlength=K * G).reshape(K, G)


def compute_cluster_stats(data: Dataset, assignment: Assignment) -> list[ClusterStats]:
    """Per-cluster size, centroid and group counts, ordered by cluster id."""
    assignment.validate_nonempty()
    counts = group_count_matrix(data, assignment)
    stats = []
    for i in range(assignment.K):
        members = data.features[assignment.cluster_of == i]
        stats.append(
            ClusterStats(
                size=int(members.shape[0]),
                centroid=members.mean(axis=0),
                group_counts=counts[i].copy(),
            )
        )
    return stats
