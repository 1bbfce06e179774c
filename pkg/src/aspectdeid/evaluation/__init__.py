"""Utility, fidelity, and re-identification evaluation harness."""

from .boosting import GradientBoostingClassifier
from .kmeans import kmeans_fit, kmeans_predict
from .metrics import (
    MetricsReport,
    adjusted_mutual_information,
    adjusted_rand_index,
    metrics_report,
    partition_agreement_scores,
    top_n_accuracy,
)
from .protocols import (
    ReidReport,
    cluster_labels,
    clustering_fidelity,
    evaluate_utility,
    mean_vectors,
    reid_attack,
    standardized_vectors,
    variant_features,
    utility_self_test,
)

__all__ = [
    "GradientBoostingClassifier",
    "MetricsReport",
    "ReidReport",
    "adjusted_mutual_information",
    "adjusted_rand_index",
    "cluster_labels",
    "clustering_fidelity",
    "evaluate_utility",
    "kmeans_fit",
    "kmeans_predict",
    "mean_vectors",
    "metrics_report",
    "partition_agreement_scores",
    "reid_attack",
    "standardized_vectors",
    "variant_features",
    "top_n_accuracy",
    "utility_self_test",
]
