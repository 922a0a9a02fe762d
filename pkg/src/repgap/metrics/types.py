"""Result containers shared by the metric implementations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Metric(str, Enum):
    JS = "JS"
    MH = "MH"
    WS = "WS"
    RMI = "RMI"


@dataclass
class SetMetricResult:
    """A set-level metric value with its applicable range attached.

    ``bound_high`` is ``math.inf`` for one-sided metrics; JSON output maps
    infinite bounds to ``null`` so downstream consumers never have to
    parse non-standard tokens.
    """

    metric: Metric
    value: float
    n: int
    p: int
    bound_low: float = 0.0
    bound_high: float = math.inf
    per_pair_values: list[float] | None = None
    pct_of_bound: float | None = None
    lambda_used: float | None = None
    solver: str | None = None
    row_normalized: bool = False
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "value": self.value,
            "n": self.n,
            "p": self.p,
            "bound_low": self.bound_low,
            "bound_high": None if math.isinf(self.bound_high) else self.bound_high,
            "per_pair_values": self.per_pair_values,
            "pct_of_bound": self.pct_of_bound,
            "lambda_used": self.lambda_used,
            "solver": self.solver,
            "row_normalized": self.row_normalized,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SetMetricResult":
        bound_high = data.get("bound_high")
        return cls(
            metric=Metric(data["metric"]),
            value=float(data["value"]),
            n=int(data["n"]),
            p=int(data["p"]),
            bound_low=float(data.get("bound_low", 0.0)),
            bound_high=math.inf if bound_high is None else float(bound_high),
            per_pair_values=data.get("per_pair_values"),
            pct_of_bound=data.get("pct_of_bound"),
            lambda_used=data.get("lambda_used"),
            solver=data.get("solver"),
            row_normalized=bool(data.get("row_normalized", False)),
            flags=tuple(data.get("flags", ())),
        )


@dataclass
class ShrinkageCovariance:
    """Gaussian fit with a scaled-identity ridge keeping it invertible."""

    mean: np.ndarray
    cov_regularized: np.ndarray
    lambda_used: float

    @property
    def p(self) -> int:
        return int(self.mean.shape[0])
