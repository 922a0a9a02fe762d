"""Two-sample homoscedastic one-tailed t-test between measurement groups.

The p-value comes from the t-distribution CDF evaluated through the
regularized incomplete beta function (continued fraction, Lentz scheme),
so no table lookup is involved; printed t-tables serve as test oracles
instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from repgap.errors import NumericalError, ValidationError

BETACF_MAX_ITER = 200
BETACF_TOL = 1e-12

INCONCLUSIVE_LOW = 0.15
INCONCLUSIVE_HIGH = 0.20
FLAG_INCONCLUSIVE = "inconclusive-small-sample"


class GroupLabel(str, Enum):
    ANOMALY_FG = "anomaly_fg"
    ANOMALY_BG = "anomaly_bg"


class Tail(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


class Decision(str, Enum):
    REJECT = "reject_H0"
    FAIL_TO_REJECT = "fail_to_reject"


@dataclass
class MeasurementGroup:
    """Per-pair metric values measured between two crop domains."""

    label: GroupLabel
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.shape[0] < 2:
            raise ValidationError(
                f"group {self.label.value} needs at least 2 values, got {self.values.shape}"
            )
        if not np.isfinite(self.values).all():
            raise ValidationError(f"group {self.label.value} has non-finite values")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def variance(self) -> float:
        return float(self.values.var(ddof=1))


@dataclass
class TTestResult:
    t: float
    df: int
    p_one_tailed: float
    pooled_std: float
    decision: Decision
    alpha: float
    tail: Tail
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "df": self.df,
            "p_one_tailed": self.p_one_tailed,
            "pooled_std": self.pooled_std,
            "decision": self.decision.value,
            "alpha": self.alpha,
            "tail": self.tail.value,
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# Regularized incomplete beta and the t-distribution tail
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETACF_TOL:
            return h
    raise NumericalError(
        f"incomplete beta continued fraction did not converge in {BETACF_MAX_ITER} iterations"
    )


def betainc_regularized(a: float, b: float, x: float) -> float:
    """I_x(a, b), the regularized incomplete beta function."""
    if a <= 0.0 or b <= 0.0:
        raise ValidationError(f"beta parameters must be positive, got a={a}, b={b}")
    if x < 0.0 or x > 1.0:
        raise ValidationError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def p_value(t: float, df: int) -> float:
    """One-tailed upper-tail probability P(T >= t) for Student's t."""
    if df < 1:
        raise ValidationError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    half_tail = 0.5 * betainc_regularized(df / 2.0, 0.5, x)
    return half_tail if t > 0.0 else 1.0 - half_tail


# ---------------------------------------------------------------------------
# Test statistics
# ---------------------------------------------------------------------------

def pooled_std(a: MeasurementGroup, b: MeasurementGroup) -> float:
    """sqrt(((n1-1)*var_a + (n2-1)*var_b) / (n1+n2-2)), sample variances."""
    df = a.n + b.n - 2
    if df <= 0:
        raise ValidationError(f"pooled variance needs n1+n2 > 2, got {a.n}+{b.n}")
    return math.sqrt(((a.n - 1) * a.variance + (b.n - 1) * b.variance) / df)


def t_statistic(a: MeasurementGroup, b: MeasurementGroup) -> tuple[float, int, float]:
    """(t, df, pooled_std) for the homoscedastic two-sample statistic."""
    sp = pooled_std(a, b)
    df = a.n + b.n - 2
    mean_gap = a.mean - b.mean
    if sp == 0.0:
        if mean_gap == 0.0:
            return 0.0, df, 0.0
        raise NumericalError(
            "degenerate variance: both groups constant but their means differ"
        )
    t = mean_gap / (sp * math.sqrt(1.0 / a.n + 1.0 / b.n))
    return t, df, sp


def hypothesis_test(
    fg: MeasurementGroup,
    bg: MeasurementGroup,
    alpha: float = 0.05,
    tail: Tail = Tail.LOWER,
) -> TTestResult:
    """Test whether anomaly-to-foreground measurements sit below (lower
    tail) anomaly-to-background measurements.

    P-values inside [0.15, 0.20] are additionally flagged as inconclusive
    at small sample sizes; the flag never alters the decision.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    t, df, sp = t_statistic(fg, bg)
    p = p_value(-t, df) if tail is Tail.LOWER else p_value(t, df)
    decision = Decision.REJECT if p < alpha else Decision.FAIL_TO_REJECT
    flags: tuple[str, ...] = ()
    if INCONCLUSIVE_LOW <= p <= INCONCLUSIVE_HIGH:
        flags = (FLAG_INCONCLUSIVE,)
    return TTestResult(
        t=t,
        df=df,
        p_one_tailed=p,
        pooled_std=sp,
        decision=decision,
        alpha=alpha,
        tail=tail,
        flags=flags,
    )
