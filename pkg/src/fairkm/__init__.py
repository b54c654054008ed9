"""K-means clustering with fairness-aware post-processing of memberships."""

from .core import (
    Assignment,
    ClusterStats,
    DataError,
    Dataset,
    ParseError,
    RunConfig,
    SchemaError,
    ValidityError,
    compute_cluster_stats,
    group_count_matrix,
    group_proportions,
    load_csv,
    standardize,
)
from .fairadjust import (
    AdjustmentTrace,
    SwitchRecord,
    balance_enough,
    fair_adjust_multi,
    fc_gini,
    fc_near_foreign,
    select_extreme_pair,
)
from .kmeans import KMeansResult, assign_points, init_centroids, run_kmeans, update_centroids
from .metrics import (
    FairnessReport,
    balance,
    cluster_quality_kappa,
    fairness_index,
    gini,
    ss_decomposition,
)
from .neighbors import NeighborSet, knn, knn_batch

__version__ = "0.1.0"

__all__ = [
    "AdjustmentTrace",
    "Assignment",
    "ClusterStats",
    "DataError",
    "Dataset",
    "FairnessReport",
    "KMeansResult",
    "NeighborSet",
    "ParseError",
    "RunConfig",
    "SchemaError",
    "SwitchRecord",
    "ValidityError",
    "assign_points",
    "balance",
    "balance_enough",
    "cluster_quality_kappa",
    "compute_cluster_stats",
    "fair_adjust_multi",
    "fairness_index",
    "fc_gini",
    "fc_near_foreign",
    "gini",
    "group_count_matrix",
    "group_proportions",
    "init_centroids",
    "knn",
    "knn_batch",
    "load_csv",
    "run_kmeans",
    "select_extreme_pair",
    "ss_decomposition",
    "standardize",
    "update_centroids",
    "__version__",
]
