"""Aggregation of per-(class, backbone) measurements into tables and
plot-ready columnar files.

Emissions are deterministic: fixed input produces byte-identical output.
Plot files carry data only (class label vs value); rendering is left to
external tools, as is any low-dimensional projection of the exported
embeddings.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from repgap.errors import ValidationError
from repgap.featstore import FeatureMatrix
from repgap.metrics.mahalanobis import mahalanobis_upper_bound

METRIC_NAMES = ("JS", "MH", "WS", "RMI", "PVAL")
PLOT_KINDS = ("class_curves", "rmi_scatter", "pvalue_bars")


@dataclass(frozen=True)
class MetricRecord:
    """One measured value with full provenance.

    ``detail`` is empty for the core metrics; p-value records use it to
    name the metric the p-value was computed from, keeping keys unique.
    """

    dataset: str
    object_type: str
    anomaly_class: str
    backbone_name: str
    pretrain_dataset: str
    metric: str
    value: float
    n: int
    p: int
    detail: str = ""
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.metric not in METRIC_NAMES:
            raise ValidationError(f"unknown metric {self.metric!r}")

    @property
    def key(self) -> tuple:
        return (
            self.dataset,
            self.object_type,
            self.anomaly_class,
            self.backbone_name,
            self.pretrain_dataset,
            self.metric,
            self.detail,
        )


@dataclass
class ClassAggregate:
    dataset: str
    anomaly_class: str
    metric: str
    mean_over_backbones: float
    backbone_count: int
    pct_of_bound: float | None = None
    sample_n: int | None = field(default=None)
    feature_p: int | None = field(default=None)

    @property
    def key(self) -> tuple:
        return (self.dataset, self.anomaly_class, self.metric)


def aggregate_by_class(records: list[MetricRecord]) -> list[ClassAggregate]:
    """Arithmetic mean per (dataset, anomaly class, metric), sorted by key."""
    seen: set[tuple] = set()
    for rec in records:
        if rec.key in seen:
            raise ValidationError(f"duplicate record key {rec.key}")
        seen.add(rec.key)

    groups: dict[tuple, list[MetricRecord]] = {}
    for rec in records:
        groups.setdefault((rec.dataset, rec.anomaly_class, rec.metric), []).append(rec)

    aggregates = []
    for key in sorted(groups):
        # fixed member order keeps the mean bit-identical under any
        # permutation of the input records
        members = sorted(groups[key], key=lambda m: m.key)
        ns = {m.n for m in members}
        ps = {m.p for m in members}
        aggregates.append(
            ClassAggregate(
                dataset=key[0],
                anomaly_class=key[1],
                metric=key[2],
                mean_over_backbones=sum(m.value for m in members) / len(members),
                backbone_count=len(members),
                sample_n=ns.pop() if len(ns) == 1 else None,
                feature_p=ps.pop() if len(ps) == 1 else None,
            )
        )
    return aggregates


def pct_of_bound_report(
    aggregates: list[ClassAggregate], bounds: dict[str, float]
) -> list[ClassAggregate]:
    """Attach value/bound*100 to every MH aggregate.

    ``bounds`` maps dataset name to the within-set cap for that dataset's
    sample regime; a missing entry is an error rather than a silent skip.
    """
    for agg in aggregates:
        if agg.metric != "MH":
            continue
        if agg.dataset not in bounds:
            raise ValidationError(f"missing bound context for dataset {agg.dataset!r}")
        agg.pct_of_bound = 100.0 * agg.mean_over_backbones / bounds[agg.dataset]
    return aggregates


def bounds_from_records(records: list[MetricRecord]) -> dict[str, float]:
    """Per-dataset MH cap derived from consistent (n, p) record metadata."""
    shapes: dict[str, set[tuple[int, int]]] = {}
    for rec in records:
        if rec.metric == "MH":
            shapes.setdefault(rec.dataset, set()).add((rec.n, rec.p))
    bounds = {}
    for dataset, pairs in shapes.items():
        if len(pairs) == 1:
            n, p = next(iter(pairs))
            bounds[dataset] = mahalanobis_upper_bound(n, p)
    return bounds


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_tables(
    aggregates: list[ClassAggregate], out_dir: str | Path, fmt: str = "csv"
) -> list[Path]:
    """Write the class-aggregate table as CSV or JSON."""
    if not aggregates:
        raise ValidationError("no aggregates to emit")
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(aggregates, key=lambda a: a.key)
    if fmt == "csv":
        path = out_dir / "aggregates.csv"
        _write_csv(
            path,
            ["dataset", "anomaly_class", "metric", "mean", "backbone_count", "pct_of_bound"],
            [
                [
                    a.dataset,
                    a.anomaly_class,
                    a.metric,
                    repr(a.mean_over_backbones),
                    a.backbone_count,
                    "" if a.pct_of_bound is None else repr(a.pct_of_bound),
                ]
                for a in ordered
            ],
        )
    else:
        path = out_dir / "aggregates.json"
        payload = [
            {
                "dataset": a.dataset,
                "anomaly_class": a.anomaly_class,
                "metric": a.metric,
                "mean": a.mean_over_backbones,
                "backbone_count": a.backbone_count,
                "pct_of_bound": a.pct_of_bound,
            }
            for a in ordered
        ]
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [path]


def read_aggregates_json(path: str | Path) -> list[ClassAggregate]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        ClassAggregate(
            dataset=item["dataset"],
            anomaly_class=item["anomaly_class"],
            metric=item["metric"],
            mean_over_backbones=item["mean"],
            backbone_count=item["backbone_count"],
            pct_of_bound=item.get("pct_of_bound"),
        )
        for item in data
    ]


def emit_backbone_table(
    records: list[MetricRecord], metric: str, out_dir: str | Path
) -> Path:
    """Wide per-metric table: one row per (dataset, object, class), one
    column per (backbone, pretraining dataset), columns ordered backbone
    first, pretraining dataset second."""
    matching = [r for r in records if r.metric == metric]
    if not matching:
        raise ValidationError(f"no records for metric {metric!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = sorted({(r.backbone_name, r.pretrain_dataset) for r in matching})
    row_keys = sorted({(r.dataset, r.object_type, r.anomaly_class) for r in matching})
    cell: dict[tuple, float] = {
        (r.dataset, r.object_type, r.anomaly_class, r.backbone_name, r.pretrain_dataset): r.value
        for r in matching
    }
    header = ["dataset", "object_type", "anomaly_class"] + [
        f"{b}|{p}" for b, p in columns
    ]
    rows = []
    for ds, obj, cls in row_keys:
        row = [ds, obj, cls]
        for b, p in columns:
            v = cell.get((ds, obj, cls, b, p))
            row.append("" if v is None else repr(v))
        rows.append(row)
    path = out_dir / f"table_{metric.lower()}.csv"
    _write_csv(path, header, rows)
    return path


def emit_plot_data(
    records: list[MetricRecord], kind: str, out_dir: str | Path
) -> list[Path]:
    """Columnar plot data, one file per dataset."""
    if kind not in PLOT_KINDS:
        raise ValidationError(f"kind must be one of {PLOT_KINDS}, got {kind!r}")
    out_dir = Path(out_dir)

    if kind == "class_curves":
        matching = [r for r in records if r.metric in ("JS", "MH", "WS")]
        if not matching:
            raise ValidationError("no matching records for class_curves")
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        aggregates = aggregate_by_class(matching)
        for dataset in sorted({a.dataset for a in aggregates}):
            rows = [
                [a.anomaly_class, a.metric, repr(a.mean_over_backbones)]
                for a in aggregates
                if a.dataset == dataset
            ]
            path = out_dir / f"class_curves_{dataset}.csv"
            _write_csv(path, ["anomaly_class", "metric", "value"], rows)
            paths.append(path)
        return paths

    if kind == "rmi_scatter":
        matching = sorted((r for r in records if r.metric == "RMI"), key=lambda r: r.key)
    else:
        matching = sorted((r for r in records if r.metric == "PVAL"), key=lambda r: r.key)
    if not matching:
        raise ValidationError(f"no matching records for {kind}")
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for dataset in sorted({r.dataset for r in matching}):
        rows = []
        for r in matching:
            if r.dataset != dataset:
                continue
            if kind == "rmi_scatter":
                rows.append([r.anomaly_class, r.object_type, repr(r.value)])
            else:
                rows.append([r.anomaly_class, r.detail, repr(r.value)])
        header = (
            ["anomaly_class", "object_type", "value"]
            if kind == "rmi_scatter"
            else ["anomaly_class", "source_metric", "p_value"]
        )
        path = out_dir / f"{kind}_{dataset}.csv"
        _write_csv(path, header, rows)
        paths.append(path)
    return paths


def export_embeddings(matrices: list[FeatureMatrix], out_path: str | Path) -> Path:
    """Concatenate matrices into one labeled CSV for external projection."""
    if not matrices:
        raise ValidationError("no matrices to export")
    p = matrices[0].p
    for m in matrices[1:]:
        if m.p != p:
            raise ValidationError(f"feature length mismatch: {p} vs {m.p}")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    header = ["sample_id", "label"] + [f"f{i}" for i in range(p)]
    rows = []
    for m in matrices:
        for sid, row in zip(m.sample_ids, m.values):
            rows.append([sid, m.meta.kind] + [repr(float(v)) for v in row])
    _write_csv(out_path, header, rows)
    return out_path
