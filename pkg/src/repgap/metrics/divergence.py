"""KL and Jensen-Shannon divergences over discrete distributions.

KL uses natural logarithms and may be +inf when the second argument lacks
support where the first has mass. JS uses base-2 logarithms against the
half-half mixture, so it is always finite and lives in [0, 1].
"""

from __future__ import annotations

import numpy as np

from repgap import kernels
from repgap.errors import ValidationError
from repgap.featstore import PairedFeatures
from repgap.metrics.types import Metric, SetMetricResult

SHIFT_EPSILON = 1e-8
SUM_TOLERANCE = 1e-9


def validate_probability_vector(v: np.ndarray, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {v.shape}")
    if np.any(v < 0.0):
        raise ValidationError(f"{name} has negative entries")
    if abs(float(v.sum()) - 1.0) > SUM_TOLERANCE:
        raise ValidationError(f"{name} sums to {v.sum():.12f}, not 1")
    return v


def _check_same_dimension(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape:
        raise ValidationError(f"dimension mismatch: {p.shape} vs {q.shape}")


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Sum over the support of p of p_i * ln(p_i / q_i); +inf when q lacks
    support there. Never negative."""
    p = validate_probability_vector(p, "p")
    q = validate_probability_vector(q, "q")
    _check_same_dimension(p, q)
    return float(kernels.kl_rows(p[None, :], q[None, :])[0])


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    p = validate_probability_vector(p, "p")
    q = validate_probability_vector(q, "q")
    _check_same_dimension(p, q)
    return float(kernels.js_rows(p[None, :], q[None, :])[0])


def feature_to_distribution(v: np.ndarray) -> np.ndarray:
    """Map a raw feature vector to a discrete distribution.

    Shift by the minimum, add a small floor so every coordinate keeps
    support, then normalize to unit sum.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"feature vector must be 1-D, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValidationError("feature vector has non-finite entries")
    shifted = v - v.min() + SHIFT_EPSILON
    return shifted / shifted.sum()


def features_to_distributions(rows: np.ndarray) -> np.ndarray:
    """Row-wise :func:`feature_to_distribution` for an (n, p) matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    shifted = rows - rows.min(axis=1, keepdims=True) + SHIFT_EPSILON
    return shifted / shifted.sum(axis=1, keepdims=True)


def js_set(pairs: PairedFeatures) -> SetMetricResult:
    """Mean per-pair JS divergence between defect rows and companion rows."""
    p = features_to_distributions(pairs.defect.values)
    q = features_to_distributions(pairs.companion.values)
    per_pair = kernels.js_rows(p, q)
    return SetMetricResult(
        metric=Metric.JS,
        value=float(per_pair.mean()),
        n=pairs.n,
        p=pairs.p,
        bound_low=0.0,
        bound_high=1.0,
        per_pair_values=[float(x) for x in per_pair],
    )
