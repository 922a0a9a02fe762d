"""Regional mutual information between two patches in pixel space.

Every valid pixel position contributes one region^2-dimensional
neighborhood vector per patch. With X the anomaly-free vectors and Y the
defect vectors, the score is -1/2 * log det of the posterior covariance
of Y given X,

    M = cov(Y) - cov(Y,X) (cov(X) + eps*I)^(-1) cov(X,Y),

evaluated through the eigenvalues of M + eps*I. High values mean strong
pixel-level dependence; the score is unbounded from below and +inf only
in degenerate limits that the regularization excludes.

Patches are converted to luma (ITU-R 601 weights) and scaled to [0, 1]
before covariance estimation so the fixed regularizer is meaningful.
"""

from __future__ import annotations

import numpy as np

from repgap.corpus.types import PixelPatch
from repgap.errors import NumericalError, ValidationError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
DEFAULT_REGION = 3
EPSILON = 1e-6


def to_luma(patch: PixelPatch | np.ndarray) -> np.ndarray:
    """(H, W) luma plane in [0, 1] from a patch of any supported depth."""
    pixels = patch.pixels if isinstance(patch, PixelPatch) else np.asarray(patch)
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    if pixels.shape[2] == 1:
        gray = pixels[:, :, 0].astype(np.float64)
    elif pixels.shape[2] == 3:
        gray = pixels.astype(np.float64) @ LUMA_WEIGHTS
    else:
        raise ValidationError(f"unsupported channel count {pixels.shape[2]}")
    return gray / 255.0


def neighborhood_vectors(luma: np.ndarray, region: int) -> np.ndarray:
    """(m, region^2) matrix of flattened square neighborhoods, stride 1."""
    h, w = luma.shape
    windows = np.lib.stride_tricks.sliding_window_view(luma, (region, region))
    return windows.reshape((h - region + 1) * (w - region + 1), region * region)


def _cross_stats(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = x.shape[0]
    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    denom = max(m - 1, 1)
    return xc.T @ xc / denom, yc.T @ yc / denom, yc.T @ xc / denom


def rmi(
    defect_patch: PixelPatch,
    normal_patch: PixelPatch,
    region: int = DEFAULT_REGION,
    epsilon: float = EPSILON,
) -> float:
    if defect_patch.pixels.shape != normal_patch.pixels.shape:
        raise ValidationError(
            f"patch shapes differ: {defect_patch.pixels.shape} vs {normal_patch.pixels.shape}"
        )
    if region < 3 or region % 2 == 0:
        raise ValidationError(f"region must be odd and >= 3, got {region}")
    h, w = defect_patch.size
    if region > min(h, w):
        raise ValidationError(f"region {region} larger than patch side {min(h, w)}")

    x = neighborhood_vectors(to_luma(normal_patch), region)
    y = neighborhood_vectors(to_luma(defect_patch), region)
    cov_x, cov_y, cov_yx = _cross_stats(x, y)

    d = cov_x.shape[0]
    ridge_x = cov_x + epsilon * np.eye(d)
    posterior = cov_y - cov_yx @ np.linalg.solve(ridge_x, cov_yx.T)
    posterior = 0.5 * (posterior + posterior.T) + epsilon * np.eye(d)
    eigenvalues = np.linalg.eigvalsh(posterior)
    if np.any(eigenvalues <= 0.0):
        raise NumericalError(
            f"posterior covariance lost positive definiteness (min eig {eigenvalues.min():.3e})"
        )
    return float(-0.5 * np.log(eigenvalues).sum())
