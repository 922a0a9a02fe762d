"""Measurement toolchain for the domain gap between anomalous and
anomaly-free visual patterns.

The package is organized as a pipeline:

* :mod:`repgap.corpus` turns annotated inspection images into paired,
  shape-normalized crops (defect / anomaly-free foreground / background).
* :mod:`repgap.featstore` defines the FGAP binary feature-matrix format
  that decouples backbone inference from metric computation.
* :mod:`repgap.metrics` computes JS divergence, Mahalanobis distance,
  exact 2-Wasserstein distance and regional mutual information, together
  with their theoretical bound checks.
* :mod:`repgap.stats` runs the two-sample homoscedastic one-tailed t-test
  between measurement groups.
* :mod:`repgap.report` aggregates per-class results into tables and
  plot-ready data files.
* :mod:`repgap.cli` wires everything into one command line tool.
"""

__version__ = "0.1.0"

from repgap.errors import (
    InputOutputError,
    NumericalError,
    RepgapError,
    UsageError,
    ValidationError,
)

__all__ = [
    "__version__",
    "RepgapError",
    "UsageError",
    "InputOutputError",
    "ValidationError",
    "NumericalError",
]
