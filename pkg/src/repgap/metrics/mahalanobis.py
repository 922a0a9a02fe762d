"""Mahalanobis distance of defect embeddings from the anomaly-free
Gaussian, with shrinkage covariance and the within-sample range cap.

The covariance of the anomaly-free set is regularized with a scaled
identity, lambda = max(1e-6, 1e-3 * trace(cov) / p), because these sets
routinely have far fewer samples than feature dimensions.
"""

from __future__ import annotations

import numpy as np

from repgap.errors import NumericalError, ValidationError
from repgap.featstore import FeatureMatrix
from repgap.metrics.types import Metric, SetMetricResult, ShrinkageCovariance

LAMBDA_FLOOR = 1e-6
LAMBDA_TRACE_SCALE = 1e-3


def mahalanobis_upper_bound(n: int, p: int) -> float:
    """Largest value the within-sample distance measure can reach.

    (n-1)*p/n when n > p+1, else (n-1)^2/n.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 samples, got n={n}")
    if p < 1:
        raise ValidationError(f"feature length must be >= 1, got p={p}")
    if n > p + 1:
        return (n - 1) * p / n
    return (n - 1) ** 2 / n


def fit_shrinkage_gaussian(values: np.ndarray | FeatureMatrix) -> ShrinkageCovariance:
    """Sample mean and ridge-regularized sample covariance (divisor n-1)."""
    if isinstance(values, FeatureMatrix):
        values = values.values
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"expected an (n, p) matrix, got shape {x.shape}")
    n, p = x.shape
    if n < 2:
        raise ValidationError(f"need at least 2 samples to fit a covariance, got n={n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)
    lam = max(LAMBDA_FLOOR, LAMBDA_TRACE_SCALE * float(np.trace(cov)) / p)
    cov[np.diag_indices_from(cov)] += lam
    return ShrinkageCovariance(mean=mean, cov_regularized=cov, lambda_used=lam)


def mahalanobis_distances(rows: np.ndarray, gaussian: ShrinkageCovariance) -> np.ndarray:
    """Distance of each row from the fitted Gaussian, via Cholesky solve."""
    x = np.asarray(rows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != gaussian.p:
        raise ValidationError(
            f"rows must be (n, {gaussian.p}), got shape {x.shape}"
        )
    try:
        chol = np.linalg.cholesky(gaussian.cov_regularized)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "regularized covariance is not positive definite; "
            "this cannot happen for a shrinkage fit"
        )
    diff = (x - gaussian.mean).T
    whitened = np.linalg.solve(chol, diff)
    return np.sqrt(np.einsum("ij,ij->j", whitened, whitened))


def within_set_distances(values: np.ndarray | FeatureMatrix) -> np.ndarray:
    """Distances of a set's own samples from their fitted Gaussian."""
    if isinstance(values, FeatureMatrix):
        values = values.values
    gaussian = fit_shrinkage_gaussian(values)
    return mahalanobis_distances(np.asarray(values, dtype=np.float64), gaussian)


def mahalanobis_set(defect: FeatureMatrix, normal: FeatureMatrix) -> SetMetricResult:
    """Mean distance of defect rows from the anomaly-free Gaussian.

    The attached upper bound is the within-sample range cap for the
    anomaly-free set; cross-set values may legitimately exceed it and are
    reported relative to it as ``pct_of_bound``.
    """
    if defect.p != normal.p:
        raise ValidationError(f"feature length mismatch: {defect.p} vs {normal.p}")
    gaussian = fit_shrinkage_gaussian(normal)
    distances = mahalanobis_distances(defect.values.astype(np.float64), gaussian)
    bound = mahalanobis_upper_bound(normal.n, normal.p)
    value = float(distances.mean())
    return SetMetricResult(
        metric=Metric.MH,
        value=value,
        n=normal.n,
        p=normal.p,
        bound_low=0.0,
        bound_high=bound,
        per_pair_values=[float(d) for d in distances],
        pct_of_bound=100.0 * value / bound,
        lambda_used=gaussian.lambda_used,
    )
