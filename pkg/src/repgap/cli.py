"""Command line entry point.

Subcommands: prepare, measure, rmi, ttest, report, export-embeddings,
verify-bounds, run (full pipeline), plus adapt-mvtec and pixel-features
helpers. The default seed is 42; the REPGAP_SEED environment variable
overrides it and an explicit --seed flag overrides both. For `run`, a
JSON config file can hold any setting and flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from repgap import __version__
from repgap.errors import InputOutputError, RepgapError, UsageError, ValidationError
from repgap.featstore import BackboneMeta, read_features, write_features
from repgap.metrics import Metric, SetMetricResult, measure_sets, verify_bounds
from repgap.pipeline import (
    DEFAULT_ALPHA,
    DEFAULT_RMI_REGION,
    DEFAULT_TARGET_SIZE,
    load_config,
    parse_metrics,
    run_pipeline,
    write_rmi_csv,
)
from repgap.stats import GroupLabel, MeasurementGroup, Tail, hypothesis_test


def default_seed() -> int:
    raw = os.environ.get("REPGAP_SEED")
    if raw is None:
        return 42
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"REPGAP_SEED must be an integer, got {raw!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repgap",
        description="Measure statistical closeness between anomalous and "
        "anomaly-free visual pattern domains.",
    )
    parser.add_argument("--version", action="version", version=f"repgap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build paired crop sets from a manifest")
    p.add_argument("--manifest", required=True, help="annotation manifest JSON")
    p.add_argument("--out", required=True, help="output directory for crops and pairs.json")
    p.add_argument("--size", type=int, default=DEFAULT_TARGET_SIZE, help="normalized crop size")
    p.add_argument("--seed", type=int, default=None, help="placement seed (default 42)")

    p = sub.add_parser("adapt-mvtec", help="write a manifest for an MVTec-AD style tree")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--object-type", required=True, help="object folder name, e.g. wood")
    p.add_argument("--out", required=True, help="manifest path to write")

    p = sub.add_parser("pixel-features", help="featurize crops with the built-in pixel grid")
    p.add_argument("--pairs", required=True, help="pairs.json from prepare")
    p.add_argument("--kind", required=True, choices=["defect", "normal_fg", "background"])
    p.add_argument("--out", required=True, help="FGAP file to write")
    p.add_argument("--grid", type=int, default=16, help="cells per side")

    p = sub.add_parser("measure", help="latent-space metrics between two FGAP files")
    p.add_argument("--defect", required=True, help="defect FGAP file")
    p.add_argument("--normal", required=True, help="anomaly-free FGAP file")
    p.add_argument("--background", default=None, help="optional background FGAP file")
    p.add_argument("--metrics", default="js,mh,ws", help="comma list from js,mh,ws")
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("rmi", help="regional mutual information per crop pair")
    p.add_argument("--pairs", required=True, help="pairs.json from prepare")
    p.add_argument("--region", type=int, default=DEFAULT_RMI_REGION, help="odd window size")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("ttest", help="two-sample homoscedastic one-tailed t-test")
    p.add_argument("--group-a", required=True, help="CSV of values, one per line")
    p.add_argument("--group-b", required=True, help="CSV of values, one per line")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--tail", choices=["lower", "upper"], default="lower")
    p.add_argument("--out", default=None, help="optional output JSON path")

    p = sub.add_parser("report", help="aggregate measurement artifacts into tables")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of measure JSON files")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("export-embeddings", help="concatenate FGAP files into a labeled CSV")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="FGAP files")
    p.add_argument("--out", required=True, help="CSV path")

    p = sub.add_parser("verify-bounds", help="re-check metric results against their ranges")
    p.add_argument("--in", dest="in_path", required=True, help="measure JSON file")
    p.add_argument("--normal", default=None, help="optional anomaly-free FGAP for the within-set check")
    p.add_argument("--out", default=None, help="optional diagnostics JSON path")

    p = sub.add_parser("run", help="full pipeline: prepare through verify-bounds")
    p.add_argument("--config", default=None, help="JSON config file; flags override it")
    p.add_argument("--manifest", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--size", type=int, default=None, help="normalized crop size")
    p.add_argument("--metrics", default=None, help="comma list from js,mh,ws")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--tail", choices=["lower", "upper"], default=None)
    p.add_argument("--rmi-region", type=int, default=None)
    p.add_argument("--format", choices=["csv", "json"], default=None)

    return parser


def _cmd_prepare(args) -> int:
    from repgap.corpus import build_crop_sets, load_manifest, save_crop_set

    seed = args.seed if args.seed is not None else default_seed()
    manifest = load_manifest(args.manifest)
    result = build_crop_sets(manifest, args.size, seed)
    index_path = save_crop_set(result, args.out, manifest, args.size, seed)
    print(f"{len(result.pairs)} pairs, {len(result.skips)} skipped -> {index_path}")
    return 0


def _cmd_adapt_mvtec(args) -> int:
    from repgap.corpus import adapt_mvtec, save_manifest

    manifest = adapt_mvtec(args.root, args.object_type)
    save_manifest(manifest, args.out)
    print(f"{len(manifest.records)} records, classes {list(manifest.anomaly_classes)} -> {args.out}")
    return 0


def _cmd_pixel_features(args) -> int:
    from repgap.corpus import load_pairs_index
    from repgap.pixelfeat import extract_pixel_features

    pairs_path = Path(args.pairs)
    index = load_pairs_index(pairs_path)
    meta = BackboneMeta(dataset=index.get("dataset_name", ""), kind=args.kind)
    matrix = extract_pixel_features(
        index["pairs"], pairs_path.parent, args.kind, meta, args.grid
    )
    write_features(matrix, args.out)
    print(f"{matrix.n}x{matrix.p} -> {args.out}")
    return 0


def _cmd_measure(args) -> int:
    metrics = parse_metrics(args.metrics)
    defect = read_features(args.defect)
    normal = read_features(args.normal)
    comparisons = [("anomaly_fg", normal, args.normal)]
    if args.background:
        comparisons.append(("anomaly_bg", read_features(args.background), args.background))
    blocks = []
    for comparison, companion, source in comparisons:
        results = measure_sets(defect, companion, list(metrics))
        blocks.append(
            {
                "comparison": comparison,
                "dataset": defect.meta.dataset,
                "object_type": defect.meta.object_type,
                "anomaly_class": defect.meta.anomaly_class,
                "defect_meta": {
                    "backbone_name": defect.meta.backbone_name,
                    "pretrain_dataset": defect.meta.pretrain_dataset,
                    "layer_tag": defect.meta.layer_tag,
                },
                "companion_kind": companion.meta.kind,
                "companion_fgap": str(source),
                "results": [r.to_dict() for r in results],
            }
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = blocks[0] if len(blocks) == 1 else {"comparisons": blocks}
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{sum(len(b['results']) for b in blocks)} results -> {out}")
    return 0


def _cmd_rmi(args) -> int:
    path = write_rmi_csv(args.pairs, args.out, args.region)
    print(f"rmi -> {path}")
    return 0


def _read_group_csv(path: str, label: GroupLabel) -> MeasurementGroup:
    values = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise InputOutputError(f"group file not found: {path}") from None
    for i, line in enumerate(lines):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            if i == 0:
                continue  # header line
            raise ValidationError(f"{path}:{i + 1}: not a number: {text!r}")
    if len(values) < 2:
        raise ValidationError(f"{path}: need at least 2 values, found {len(values)}")
    return MeasurementGroup(label, values)


def _cmd_ttest(args) -> int:
    group_a = _read_group_csv(args.group_a, GroupLabel.ANOMALY_FG)
    group_b = _read_group_csv(args.group_b, GroupLabel.ANOMALY_BG)
    result = hypothesis_test(group_a, group_b, alpha=args.alpha, tail=Tail(args.tail))
    payload = {"n1": group_a.n, "n2": group_b.n, "result": result.to_dict()}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_report(args) -> int:
    from repgap.pipeline import collect_records
    from repgap.report import (
        aggregate_by_class,
        bounds_from_records,
        emit_backbone_table,
        emit_plot_data,
        emit_tables,
        pct_of_bound_report,
    )

    in_dir = Path(args.in_dir)
    ttest_dir = in_dir / "ttest" if (in_dir / "ttest").is_dir() else None
    records = collect_records(in_dir, ttest_dir)
    if not records:
        raise ValidationError(f"no measurement artifacts under {in_dir}")
    aggregates = aggregate_by_class([r for r in records if r.metric != "PVAL"])
    pct_of_bound_report(aggregates, bounds_from_records(records))
    paths = emit_tables(aggregates, args.out, args.format)
    for metric in sorted({r.metric for r in records if r.metric in ("JS", "MH", "WS")}):
        paths.append(emit_backbone_table(records, metric, args.out))
    plots_dir = Path(args.out) / "plots"
    paths.extend(emit_plot_data(records, "class_curves", plots_dir))
    if any(r.metric == "RMI" for r in records):
        paths.extend(emit_plot_data(records, "rmi_scatter", plots_dir))
    if any(r.metric == "PVAL" for r in records):
        paths.extend(emit_plot_data(records, "pvalue_bars", plots_dir))
    for path in paths:
        print(path)
    return 0


def _cmd_export_embeddings(args) -> int:
    from repgap.report import export_embeddings

    matrices = [read_features(p) for p in args.inputs]
    path = export_embeddings(matrices, args.out)
    print(f"{sum(m.n for m in matrices)} rows -> {path}")
    return 0


def _cmd_verify_bounds(args) -> int:
    payload = json.loads(Path(args.in_path).read_text(encoding="utf-8"))
    blocks = payload.get("comparisons", [payload])
    normal = read_features(args.normal) if args.normal else None
    diagnostics = []
    for block in blocks:
        for raw in block.get("results", []):
            result = SetMetricResult.from_dict(raw)
            diag = verify_bounds(result, normal if result.metric is Metric.MH else None)
            diagnostics.append(diag.to_dict())
            status = "pass" if diag.passed else "FAIL"
            print(f"{result.metric.value}: {status}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps(
                {"all_passed": all(d["passed"] for d in diagnostics), "diagnostics": diagnostics},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    return 0


def _cmd_run(args) -> int:
    overrides = {
        "manifest": args.manifest,
        "out": args.out,
        "seed": args.seed,
        "target_size": args.size,
        "metrics": args.metrics,
        "alpha": args.alpha,
        "tail": args.tail,
        "rmi_region": args.rmi_region,
        "format": args.format,
    }
    config = load_config(args.config, overrides, fallback_seed=default_seed())
    art = run_pipeline(config)
    print(f"pipeline complete -> {config.out}")
    print(f"verify: {art.verify_path}")
    return 0


_COMMANDS = {
    "prepare": _cmd_prepare,
    "adapt-mvtec": _cmd_adapt_mvtec,
    "pixel-features": _cmd_pixel_features,
    "measure": _cmd_measure,
    "rmi": _cmd_rmi,
    "ttest": _cmd_ttest,
    "report": _cmd_report,
    "export-embeddings": _cmd_export_embeddings,
    "verify-bounds": _cmd_verify_bounds,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except RepgapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
