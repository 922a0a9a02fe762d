"""Range diagnostics for computed metric results.

Every metric carries an applicable range: JS lives in the unit interval,
the Mahalanobis measure is non-negative and capped within-set by the
sample-size formula, Wasserstein and RMI are one-sided. ``verify_bounds``
re-checks a result against those ranges and, when the anomaly-free matrix
is supplied, additionally verifies that its own samples respect the
within-set cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from repgap.featstore import FeatureMatrix
from repgap.metrics.mahalanobis import mahalanobis_upper_bound, within_set_distances
from repgap.metrics.types import Metric, SetMetricResult


@dataclass(frozen=True)
class BoundCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class BoundDiagnostic:
    metric: Metric
    checks: list[BoundCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks
            ],
        }


def _finite(value: float) -> bool:
    return math.isfinite(value)


def verify_bounds(
    result: SetMetricResult, normal: FeatureMatrix | None = None
) -> BoundDiagnostic:
    """Pass/fail per applicable bound; always returns a diagnostic."""
    checks: list[BoundCheck] = []
    v = result.value

    if result.metric is Metric.JS:
        ok = _finite(v) and 0.0 <= v <= 1.0
        checks.append(
            BoundCheck(
                "js-unit-range",
                ok,
                f"value {v:.6g} {'inside' if ok else 'outside'} [0, 1]",
            )
        )
        if result.per_pair_values:
            bad = [x for x in result.per_pair_values if not (_finite(x) and 0.0 <= x <= 1.0)]
            checks.append(
                BoundCheck(
                    "js-unit-range-per-pair",
                    not bad,
                    f"{len(bad)} of {len(result.per_pair_values)} pair values out of range",
                )
            )
    elif result.metric is Metric.MH:
        ok = _finite(v) and v >= 0.0
        checks.append(BoundCheck("mh-non-negative", ok, f"value {v:.6g}"))
        if normal is not None:
            cap = mahalanobis_upper_bound(normal.n, normal.p)
            worst = float(within_set_distances(normal).max())
            checks.append(
                BoundCheck(
                    "mh-within-set-cap",
                    worst <= cap,
                    f"max within-set distance {worst:.6g} vs cap {cap:.6g} "
                    f"(n={normal.n}, p={normal.p})",
                )
            )
    elif result.metric is Metric.WS:
        ok = _finite(v) and v >= 0.0
        checks.append(BoundCheck("ws-non-negative", ok, f"value {v:.6g}"))
    elif result.metric is Metric.RMI:
        ok = not math.isnan(v) and v < math.inf
        checks.append(BoundCheck("rmi-finite-from-right", ok, f"value {v:.6g}"))

    return BoundDiagnostic(metric=result.metric, checks=checks)
