import numpy as np
import pytest

from repgap.errors import ValidationError
from repgap.featstore import BackboneMeta, FeatureMatrix
from repgap.report import (
    ClassAggregate,
    MetricRecord,
    aggregate_by_class,
    emit_backbone_table,
    emit_plot_data,
    emit_tables,
    export_embeddings,
    pct_of_bound_report,
    read_aggregates_json,
)


def record(value, metric="JS", cls="patches", backbone="bit-50x1", pretrain="set-1", **kw):
    defaults = dict(dataset="steel-corpus", object_type="steel", anomaly_class=cls,
                    backbone_name=backbone, pretrain_dataset=pretrain, metric=metric,
                    value=value, n=100, p=64)
    defaults.update(kw)
    return MetricRecord(**defaults)


def test_single_record_aggregate_is_identity():
    aggs = aggregate_by_class([record(0.25)])
    assert len(aggs) == 1
    assert aggs[0].mean_over_backbones == 0.25
    assert aggs[0].backbone_count == 1


def test_three_backbone_mean():
    records = [record(v, backbone=f"b{i}") for i, v in enumerate((10.0, 20.0, 30.0))]
    aggs = aggregate_by_class(records)
    assert aggs[0].mean_over_backbones == pytest.approx(20.0)
    assert aggs[0].backbone_count == 3


def test_backbone_variation_row_mean():
    # six backbone/pretraining columns for one steel anomaly class,
    # values in units of 1e-4
    cells = [24, 11, 7, 2, 11, 9]
    records = [
        record(v * 1e-4, backbone=f"bit-{i // 2}", pretrain=f"set-{i % 2}")
        for i, v in enumerate(cells)
    ]
    aggs = aggregate_by_class(records)
    assert aggs[0].mean_over_backbones == pytest.approx(10.67e-4, abs=0.005e-4)
    assert aggs[0].backbone_count == 6


def test_duplicate_key_rejected():
    with pytest.raises(ValidationError, match="duplicate record key"):
        aggregate_by_class([record(1.0), record(2.0)])


def test_pct_of_bound_anchors():
    aggs = [
        ClassAggregate("ds-a", "c", "MH", mean_over_backbones=37.2, backbone_count=1),
        ClassAggregate("ds-b", "c", "MH", mean_over_backbones=102.7, backbone_count=1),
        ClassAggregate("ds-a", "c", "JS", mean_over_backbones=0.1, backbone_count=1),
    ]
    pct_of_bound_report(aggs, {"ds-a": 495.1, "ds-b": 882.1})
    assert aggs[0].pct_of_bound == pytest.approx(7.5, abs=0.05)
    assert aggs[1].pct_of_bound == pytest.approx(11.6, abs=0.05)
    assert aggs[2].pct_of_bound is None


def test_pct_of_bound_zero_mean():
    aggs = [ClassAggregate("d", "c", "MH", mean_over_backbones=0.0, backbone_count=1)]
    pct_of_bound_report(aggs, {"d": 100.0})
    assert aggs[0].pct_of_bound == 0.0


def test_pct_of_bound_missing_context():
    aggs = [ClassAggregate("d", "c", "MH", mean_over_backbones=1.0, backbone_count=1)]
    with pytest.raises(ValidationError, match="missing bound context"):
        pct_of_bound_report(aggs, {})


def test_emit_tables_csv_line_count(tmp_path):
    aggs = aggregate_by_class([record(0.5), record(0.25, cls="crazing")])
    (path,) = emit_tables(aggs, tmp_path, "csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("dataset,")


def test_emit_tables_deterministic(tmp_path):
    aggs = aggregate_by_class([record(0.5), record(0.25, cls="crazing")])
    (first,) = emit_tables(aggs, tmp_path / "a", "csv")
    (second,) = emit_tables(aggs, tmp_path / "b", "csv")
    assert first.read_bytes() == second.read_bytes()


def test_emit_tables_json_roundtrip(tmp_path):
    aggs = aggregate_by_class([record(0.5), record(0.25, cls="crazing")])
    (path,) = emit_tables(aggs, tmp_path, "json")
    again = read_aggregates_json(path)
    assert [(a.dataset, a.anomaly_class, a.metric, a.mean_over_backbones) for a in again] == [
        (a.dataset, a.anomaly_class, a.metric, a.mean_over_backbones) for a in aggs
    ]


def test_emit_backbone_table_orders_columns(tmp_path):
    records = [
        record(1.0, backbone="zeta", pretrain="set-2"),
        record(2.0, backbone="alpha", pretrain="set-9"),
        record(3.0, backbone="alpha", pretrain="set-1"),
    ]
    path = emit_backbone_table(records, "JS", tmp_path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[3:] == ["alpha|set-1", "alpha|set-9", "zeta|set-2"]


def test_emit_plot_data_class_curves(tmp_path):
    records = [record(v, cls=c) for v, c in zip((0.1, 0.2, 0.3, 0.4), "abcd")]
    paths = emit_plot_data(records, "class_curves", tmp_path)
    assert len(paths) == 1
    lines = paths[0].read_text().splitlines()
    assert len(lines) == 5  # header + 4 classes
    assert lines[1].split(",")[0] == "a"


def test_emit_plot_data_wrong_kind_errors(tmp_path):
    rmi_only = [record(10.0, metric="RMI")]
    with pytest.raises(ValidationError, match="no matching records"):
        emit_plot_data(rmi_only, "pvalue_bars", tmp_path)


def test_emit_plot_data_identity_columns(tmp_path):
    records = [record(12.5, metric="RMI", cls="crack")]
    (path,) = emit_plot_data(records, "rmi_scatter", tmp_path)
    rows = path.read_text().splitlines()
    assert rows[1] == "crack,steel,12.5"


def test_export_embeddings(tmp_path):
    rng = np.random.default_rng(0)
    defect = FeatureMatrix(
        rng.normal(size=(3, 8)).astype(np.float32),
        ("a", "b", "c"),
        BackboneMeta(kind="defect"),
    )
    normal = FeatureMatrix(
        rng.normal(size=(3, 8)).astype(np.float32),
        ("a", "b", "c"),
        BackboneMeta(kind="normal_fg"),
    )
    path = export_embeddings([defect, normal], tmp_path / "emb.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 7  # header + 6 rows
    assert lines[1].split(",")[1] == "defect"
    assert lines[4].split(",")[1] == "normal_fg"

    with pytest.raises(ValidationError, match="feature length mismatch"):
        export_embeddings(
            [defect, FeatureMatrix(np.ones((2, 4), dtype=np.float32), ("x", "y"), BackboneMeta())],
            tmp_path / "bad.csv",
        )


def test_aggregation_invariant_under_permutation_and_recomputable():
    rng = np.random.default_rng(1)
    records = [
        record(float(rng.normal()), metric=m, cls=c, backbone=f"b{i}")
        for i in range(4)
        for m in ("JS", "WS")
        for c in ("a", "b")
    ]
    base = aggregate_by_class(records)
    shuffled = list(records)
    rng.shuffle(shuffled)
    again = aggregate_by_class(shuffled)
    assert [(a.key, a.mean_over_backbones) for a in base] == [
        (a.key, a.mean_over_backbones) for a in again
    ]
    # brute-force recomputation
    for agg in base:
        members = [
            r.value
            for r in records
            if (r.dataset, r.anomaly_class, r.metric) == agg.key
        ]
        assert agg.mean_over_backbones == pytest.approx(np.mean(members), abs=1e-12)
        assert agg.backbone_count == len(members)
