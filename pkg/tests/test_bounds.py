import math

import numpy as np

from repgap.featstore import BackboneMeta, FeatureMatrix
from repgap.metrics import Metric, SetMetricResult, verify_bounds


def result(metric, value, **kw):
    defaults = dict(n=10, p=4)
    defaults.update(kw)
    return SetMetricResult(metric=metric, value=value, **defaults)


def test_js_inside_range_passes():
    diag = verify_bounds(result(Metric.JS, 0.5, bound_high=1.0))
    assert diag.passed
    assert diag.checks[0].name == "js-unit-range"


def test_js_outside_range_fails_naming_bound():
    diag = verify_bounds(result(Metric.JS, 1.3, bound_high=1.0))
    assert not diag.passed
    failing = [c for c in diag.checks if not c.passed]
    assert failing[0].name == "js-unit-range"
    assert "outside [0, 1]" in failing[0].detail


def test_js_per_pair_values_checked():
    r = result(Metric.JS, 0.5, bound_high=1.0, per_pair_values=[0.2, 1.7])
    diag = verify_bounds(r)
    assert not diag.passed


def test_ws_and_rmi_one_sided():
    assert verify_bounds(result(Metric.WS, 0.0)).passed
    assert not verify_bounds(result(Metric.WS, -0.1)).passed
    assert verify_bounds(result(Metric.RMI, -250.0)).passed
    assert not verify_bounds(result(Metric.RMI, math.inf)).passed


def test_mh_within_set_check_fuzz():
    rng = np.random.default_rng(0)
    for trial in range(100):
        if trial % 2 == 0:
            p = int(rng.integers(4, 20))
            n = int(rng.integers(3, p + 2))
        else:
            p = int(rng.integers(3, 8))
            n = int(rng.integers(p + 2, p * p + 1))
        values = rng.normal(size=(n, p)).astype(np.float32) * rng.uniform(0.5, 5)
        normal = FeatureMatrix(values, tuple(f"s{i}" for i in range(n)), BackboneMeta())
        diag = verify_bounds(
            result(Metric.MH, 1.0, n=n, p=p, bound_high=100.0), normal=normal
        )
        assert diag.passed, diag.checks
        names = [c.name for c in diag.checks]
        assert "mh-within-set-cap" in names
