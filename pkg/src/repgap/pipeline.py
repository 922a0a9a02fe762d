"""End-to-end pipeline: prepare, features, measure, rmi, ttest, report,
verify-bounds. Stages run sequentially; every stage failure is re-raised
with the stage name prefixed and the original exit code preserved. All
randomness flows from the configured seed.
"""

from __future__ import annotations

import csv
import json
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from repgap.corpus.crops import build_crop_sets, load_pairs_index, save_crop_set
from repgap.corpus.manifest import load_manifest
from repgap.corpus.types import PixelPatch
from repgap.errors import RepgapError, UsageError, ValidationError
from repgap.featstore import (
    BackboneMeta,
    FeatureMatrix,
    read_features,
    subset_by_ids,
    write_features,
)
from repgap.metrics import (
    Metric,
    SetMetricResult,
    measure_sets,
    rmi,
    verify_bounds,
)
from repgap.pixelfeat import extract_pixel_features
from repgap.report import (
    MetricRecord,
    aggregate_by_class,
    bounds_from_records,
    emit_backbone_table,
    emit_plot_data,
    emit_tables,
    pct_of_bound_report,
)
from repgap.stats import GroupLabel, MeasurementGroup, Tail, hypothesis_test

DEFAULT_SEED = 42
DEFAULT_TARGET_SIZE = 64
DEFAULT_METRICS = (Metric.JS, Metric.MH, Metric.WS)
DEFAULT_ALPHA = 0.05
DEFAULT_RMI_REGION = 3

_CONFIG_KEYS = {
    "manifest", "out", "seed", "target_size", "metrics",
    "alpha", "tail", "rmi_region", "format",
}


class StageFailure(RepgapError):
    """A pipeline stage failed; carries the underlying exit code."""

    def __init__(self, stage: str, cause: RepgapError):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.exit_code = cause.exit_code


@contextmanager
def _stage(name: str):
    try:
        yield
    except RepgapError as exc:
        raise StageFailure(name, exc) from exc


@dataclass
class RunConfig:
    manifest: Path
    out: Path
    seed: int = DEFAULT_SEED
    target_size: int = DEFAULT_TARGET_SIZE
    metrics: tuple[Metric, ...] = DEFAULT_METRICS
    alpha: float = DEFAULT_ALPHA
    tail: Tail = Tail.LOWER
    rmi_region: int = DEFAULT_RMI_REGION
    format: str = "csv"

    def __post_init__(self) -> None:
        self.manifest = Path(self.manifest)
        self.out = Path(self.out)
        if not self.metrics:
            raise UsageError("metrics must be non-empty")
        if not 0.0 < self.alpha < 1.0:
            raise UsageError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.target_size < 8:
            raise UsageError(f"target size must be >= 8, got {self.target_size}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.format!r}")


def parse_metrics(spec: str) -> tuple[Metric, ...]:
    names = [s.strip().upper() for s in spec.split(",") if s.strip()]
    if not names:
        raise UsageError("metrics list is empty")
    out = []
    for name in names:
        try:
            out.append(Metric(name))
        except ValueError:
            raise UsageError(f"unknown metric {name!r} (choose from js, mh, ws)")
    return tuple(out)


def load_config(
    path: str | Path | None, overrides: dict, fallback_seed: int | None = None
) -> RunConfig:
    """Config file values first, then explicit flag overrides on top.

    ``fallback_seed`` (typically the environment override) applies only
    when neither the config file nor a flag names a seed.
    """
    values: dict = {}
    if path is not None:
        raw = Path(path)
        try:
            data = json.loads(raw.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {raw}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"{raw}: not valid JSON ({exc})")
        if not isinstance(data, dict):
            raise UsageError(f"{raw}: config must be a JSON object")
        unknown = sorted(set(data) - _CONFIG_KEYS)
        if unknown:
            raise UsageError(f"{raw}: unknown config fields {unknown}")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in values and fallback_seed is not None:
        values["seed"] = fallback_seed
    if "manifest" not in values:
        raise UsageError("a manifest path is required (config file or --manifest)")
    if "out" not in values:
        raise UsageError("an output directory is required (config file or --out)")
    if isinstance(values.get("metrics"), str):
        values["metrics"] = parse_metrics(values["metrics"])
    elif isinstance(values.get("metrics"), (list, tuple)):
        values["metrics"] = parse_metrics(",".join(values["metrics"]))
    if isinstance(values.get("tail"), str):
        try:
            values["tail"] = Tail(values["tail"])
        except ValueError:
            raise UsageError(f"tail must be lower or upper, got {values['tail']!r}")
    return RunConfig(**values)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-").lower() or "x"


def _group_entries(pairs_index: dict) -> dict[tuple[str, str], list[dict]]:
    groups: dict[tuple[str, str], list[dict]] = {}
    for entry in pairs_index["pairs"]:
        groups.setdefault((entry["object_type"], entry["anomaly_class"]), []).append(entry)
    return dict(sorted(groups.items()))


def _load_patch(path: Path) -> PixelPatch:
    from repgap.corpus.crops import load_image_array

    pixels = load_image_array(path)
    return PixelPatch(pixels=pixels, original_size=(pixels.shape[0], pixels.shape[1]))


@dataclass
class PipelineArtifacts:
    crops_dir: Path
    features_dir: Path
    measures_dir: Path
    ttest_dir: Path
    report_dir: Path
    verify_path: Path
    measure_files: list[Path] = field(default_factory=list)


def run_pipeline(config: RunConfig) -> PipelineArtifacts:
    out = config.out
    art = PipelineArtifacts(
        crops_dir=out / "crops",
        features_dir=out / "features",
        measures_dir=out / "measures",
        ttest_dir=out / "ttest",
        report_dir=out / "report",
        verify_path=out / "verify" / "bounds.json",
    )

    with _stage("prepare"):
        manifest = load_manifest(config.manifest)
        crop_result = build_crop_sets(manifest, config.target_size, config.seed)
        save_crop_set(crop_result, art.crops_dir, manifest, config.target_size, config.seed)

    with _stage("features"):
        pairs_index = load_pairs_index(art.crops_dir / "pairs.json")
        groups = _group_entries(pairs_index)
        dataset = pairs_index.get("dataset_name", "dataset")
        matrices: dict[tuple, dict[str, FeatureMatrix]] = {}
        for (object_type, anomaly_class), entries in groups.items():
            meta = BackboneMeta(
                dataset=dataset, object_type=object_type, anomaly_class=anomaly_class,
            )
            per_kind: dict[str, FeatureMatrix] = {}
            for kind in ("defect", "normal_fg", "background"):
                try:
                    matrix = extract_pixel_features(entries, art.crops_dir, kind, meta)
                except ValidationError:
                    if kind == "background":
                        continue
                    raise
                name = f"{_slug(object_type)}__{_slug(anomaly_class)}__{kind}.fgap"
                write_features(matrix, art.features_dir / name)
                per_kind[kind] = matrix
            matrices[(object_type, anomaly_class)] = per_kind

    with _stage("measure"):
        art.measures_dir.mkdir(parents=True, exist_ok=True)
        for (object_type, anomaly_class), per_kind in matrices.items():
            base = f"{_slug(object_type)}__{_slug(anomaly_class)}"
            defect = per_kind["defect"]
            comparisons = [("anomaly_fg", per_kind["normal_fg"], "normal_fg")]
            bg = per_kind.get("background")
            if bg is not None and bg.n >= 2:
                comparisons.append(("anomaly_bg", bg, "background"))
            for comparison, companion, kind in comparisons:
                defect_side = defect
                if companion.n != defect.n:
                    defect_side = subset_by_ids(defect, list(companion.sample_ids))
                results = measure_sets(defect_side, companion, list(config.metrics))
                payload = {
                    "comparison": comparison,
                    "dataset": dataset,
                    "object_type": object_type,
                    "anomaly_class": anomaly_class,
                    "defect_meta": {
                        "backbone_name": defect.meta.backbone_name,
                        "pretrain_dataset": defect.meta.pretrain_dataset,
                        "layer_tag": defect.meta.layer_tag,
                    },
                    "companion_kind": kind,
                    "companion_fgap": f"../features/{base}__{kind}.fgap",
                    "results": [r.to_dict() for r in results],
                }
                path = art.measures_dir / f"{base}__{'fg' if comparison == 'anomaly_fg' else 'bg'}.measure.json"
                path.write_text(
                    json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
                )
                art.measure_files.append(path)

    with _stage("rmi"):
        write_rmi_csv(
            art.crops_dir / "pairs.json", art.measures_dir / "rmi.csv", config.rmi_region
        )

    with _stage("ttest"):
        art.ttest_dir.mkdir(parents=True, exist_ok=True)
        fg_results = _read_measure_results(art.measures_dir, "fg")
        bg_results = _read_measure_results(art.measures_dir, "bg")
        for key, fg_payload in fg_results.items():
            bg_payload = bg_results.get(key)
            if bg_payload is None:
                continue
            fg_by_metric = {r.metric: r for r in fg_payload["results"]}
            bg_by_metric = {r.metric: r for r in bg_payload["results"]}
            for metric in config.metrics:
                fg_r = fg_by_metric.get(metric)
                bg_r = bg_by_metric.get(metric)
                if fg_r is None or bg_r is None:
                    continue
                if not fg_r.per_pair_values or not bg_r.per_pair_values:
                    continue
                if len(fg_r.per_pair_values) < 2 or len(bg_r.per_pair_values) < 2:
                    continue
                result = hypothesis_test(
                    MeasurementGroup(GroupLabel.ANOMALY_FG, fg_r.per_pair_values),
                    MeasurementGroup(GroupLabel.ANOMALY_BG, bg_r.per_pair_values),
                    alpha=config.alpha,
                    tail=config.tail,
                )
                payload = {
                    "dataset": fg_payload["dataset"],
                    "object_type": key[0],
                    "anomaly_class": key[1],
                    "metric": metric.value,
                    "n1": len(fg_r.per_pair_values),
                    "n2": len(bg_r.per_pair_values),
                    "result": result.to_dict(),
                }
                path = art.ttest_dir / f"{_slug(key[0])}__{_slug(key[1])}__{metric.value.lower()}.ttest.json"
                path.write_text(
                    json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
                )

    with _stage("report"):
        records = collect_records(art.measures_dir, art.ttest_dir)
        aggregates = aggregate_by_class([r for r in records if r.metric != "PVAL"])
        pct_of_bound_report(aggregates, bounds_from_records(records))
        emit_tables(aggregates, art.report_dir, config.format)
        for metric in config.metrics:
            emit_backbone_table(records, metric.value, art.report_dir)
        plots_dir = art.report_dir / "plots"
        emit_plot_data(records, "class_curves", plots_dir)
        if any(r.metric == "RMI" for r in records):
            emit_plot_data(records, "rmi_scatter", plots_dir)
        if any(r.metric == "PVAL" for r in records):
            emit_plot_data(records, "pvalue_bars", plots_dir)

    with _stage("verify-bounds"):
        diagnostics = []
        for path in sorted(art.measures_dir.glob("*.measure.json")):
            payload = json.loads(path.read_text(encoding="utf-8"))
            companion = None
            companion_path = (path.parent / payload["companion_fgap"]).resolve()
            if companion_path.is_file():
                companion = read_features(companion_path)
            for raw in payload["results"]:
                result = SetMetricResult.from_dict(raw)
                diag = verify_bounds(
                    result, companion if result.metric is Metric.MH else None
                )
                diagnostics.append(
                    {
                        "source": path.name,
                        "comparison": payload["comparison"],
                        **diag.to_dict(),
                    }
                )
        art.verify_path.parent.mkdir(parents=True, exist_ok=True)
        art.verify_path.write_text(
            json.dumps(
                {"all_passed": all(d["passed"] for d in diagnostics), "diagnostics": diagnostics},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )

    return art


def write_rmi_csv(pairs_path: str | Path, out_path: str | Path, region: int) -> Path:
    """Regional mutual information per pair, defect vs foreground and
    (when present) defect vs background, as one CSV."""
    pairs_path = Path(pairs_path)
    pairs_index = load_pairs_index(pairs_path)
    crops_dir = pairs_path.parent
    dataset = pairs_index.get("dataset_name", "dataset")
    rows = []
    for (object_type, anomaly_class), entries in _group_entries(pairs_index).items():
        for entry in entries:
            defect_patch = _load_patch(crops_dir / entry["defect_png"])
            fg_patch = _load_patch(crops_dir / entry["fg_png"])
            value_fg = rmi(defect_patch, fg_patch, region)
            value_bg = ""
            if entry.get("bg_png"):
                bg_patch = _load_patch(crops_dir / entry["bg_png"])
                value_bg = repr(rmi(defect_patch, bg_patch, region))
            rows.append(
                [entry["sample_id"], dataset, object_type, anomaly_class, repr(value_fg), value_bg]
            )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["sample_id", "dataset", "object_type", "anomaly_class", "rmi_fg", "rmi_bg"]
        )
        writer.writerows(rows)
    return out_path


def _read_measure_results(
    measures_dir: Path, suffix: str
) -> dict[tuple[str, str], dict]:
    out: dict[tuple[str, str], dict] = {}
    for path in sorted(measures_dir.glob(f"*__{suffix}.measure.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["results"] = [SetMetricResult.from_dict(r) for r in payload["results"]]
        out[(payload["object_type"], payload["anomaly_class"])] = payload
    return out


def collect_records(
    measures_dir: Path, ttest_dir: Path | None = None
) -> list[MetricRecord]:
    """Build metric records from a directory of measurement artifacts.

    Only anomaly-to-foreground comparisons feed the tables; background
    comparisons exist for significance testing. RMI rows are averaged per
    class; t-test p-values become PVAL records tagged with their source
    metric.
    """
    records: list[MetricRecord] = []
    for path in sorted(Path(measures_dir).glob("*.measure.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        if payload.get("comparison") != "anomaly_fg":
            continue
        meta = payload.get("defect_meta", {})
        for raw in payload["results"]:
            result = SetMetricResult.from_dict(raw)
            records.append(
                MetricRecord(
                    dataset=payload["dataset"],
                    object_type=payload["object_type"],
                    anomaly_class=payload["anomaly_class"],
                    backbone_name=meta.get("backbone_name", ""),
                    pretrain_dataset=meta.get("pretrain_dataset", ""),
                    metric=result.metric.value,
                    value=result.value,
                    n=result.n,
                    p=result.p,
                    flags=tuple(result.flags),
                )
            )
    records.extend(_rmi_records(Path(measures_dir)))
    if ttest_dir is not None:
        for path in sorted(Path(ttest_dir).glob("*.ttest.json")):
            payload = json.loads(path.read_text(encoding="utf-8"))
            records.append(
                MetricRecord(
                    dataset=payload["dataset"],
                    object_type=payload["object_type"],
                    anomaly_class=payload["anomaly_class"],
                    backbone_name="luma-grid16",
                    pretrain_dataset="none",
                    metric="PVAL",
                    value=payload["result"]["p_one_tailed"],
                    n=payload["n1"],
                    p=0,
                    detail=payload["metric"],
                )
            )
    return records


def _rmi_records(measures_dir: Path) -> list[MetricRecord]:
    path = measures_dir / "rmi.csv"
    if not path.is_file():
        return []
    by_class: dict[tuple[str, str, str], list[float]] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row.get("dataset", "dataset"), row["object_type"], row["anomaly_class"])
            by_class.setdefault(key, []).append(float(row["rmi_fg"]))
    records = []
    for (dataset, object_type, anomaly_class), values in sorted(by_class.items()):
        records.append(
            MetricRecord(
                dataset=dataset,
                object_type=object_type,
                anomaly_class=anomaly_class,
                backbone_name="pixel",
                pretrain_dataset="none",
                metric="RMI",
                value=sum(values) / len(values),
                n=len(values),
                p=0,
            )
        )
    return records
