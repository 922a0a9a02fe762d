"""Latent-space and pixel-space closeness measures with bound checks."""

from repgap.errors import UsageError
from repgap.featstore import FeatureMatrix, pair_matrices
from repgap.metrics.bounds import BoundCheck, BoundDiagnostic, verify_bounds
from repgap.metrics.divergence import (
    feature_to_distribution,
    features_to_distributions,
    js_divergence,
    js_set,
    kl_divergence,
)
from repgap.metrics.mahalanobis import (
    fit_shrinkage_gaussian,
    mahalanobis_distances,
    mahalanobis_set,
    mahalanobis_upper_bound,
    within_set_distances,
)
from repgap.metrics.rmi import neighborhood_vectors, rmi, to_luma
from repgap.metrics.types import Metric, SetMetricResult, ShrinkageCovariance
from repgap.metrics.wasserstein import wasserstein2_set

__all__ = [
    "BoundCheck",
    "BoundDiagnostic",
    "Metric",
    "SetMetricResult",
    "ShrinkageCovariance",
    "feature_to_distribution",
    "features_to_distributions",
    "fit_shrinkage_gaussian",
    "js_divergence",
    "js_set",
    "kl_divergence",
    "mahalanobis_distances",
    "mahalanobis_set",
    "mahalanobis_upper_bound",
    "measure_sets",
    "neighborhood_vectors",
    "pair_matrices",
    "rmi",
    "to_luma",
    "verify_bounds",
    "wasserstein2_set",
    "within_set_distances",
]


def measure_sets(
    defect: FeatureMatrix,
    normal: FeatureMatrix,
    metrics: list[Metric],
) -> list[SetMetricResult]:
    """Compute the requested latent-space metrics for one pairing."""
    if not metrics:
        raise UsageError("no metrics requested")
    paired = pair_matrices(defect, normal)
    results = []
    for metric in metrics:
        if metric is Metric.JS:
            results.append(js_set(paired))
        elif metric is Metric.MH:
            results.append(mahalanobis_set(paired.defect, paired.companion))
        elif metric is Metric.WS:
            results.append(wasserstein2_set(paired.defect, paired.companion))
        else:
            raise UsageError(f"metric {metric.value} is not a latent-space set metric")
    return results
