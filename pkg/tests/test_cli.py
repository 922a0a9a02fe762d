import json

import numpy as np
import pytest

from repgap.cli import build_parser, main
from repgap.featstore import BackboneMeta, FeatureMatrix, write_features

ALL_SUBCOMMANDS = [
    "prepare",
    "adapt-mvtec",
    "pixel-features",
    "measure",
    "rmi",
    "ttest",
    "report",
    "export-embeddings",
    "verify-bounds",
    "run",
]


def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for name in ALL_SUBCOMMANDS:
        assert name in text


@pytest.mark.parametrize(
    "command,flags",
    [
        ("prepare", ["--manifest", "--out", "--size", "--seed"]),
        ("measure", ["--defect", "--normal", "--background", "--metrics", "--out"]),
        ("rmi", ["--pairs", "--region", "--out"]),
        ("ttest", ["--group-a", "--group-b", "--alpha", "--tail", "--out"]),
        ("report", ["--in", "--out", "--format"]),
        ("export-embeddings", ["--in", "--out"]),
        ("verify-bounds", ["--in"]),
        ("run", ["--config", "--manifest", "--out", "--seed", "--metrics", "--alpha", "--tail"]),
    ],
)
def test_documented_flags_present(command, flags, capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in flags:
        assert flag in text, f"{command} help lacks {flag}"


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["prepare", "--out", "somewhere"])
    assert exc.value.code == 2


def test_prepare_and_downstream_flow(tiny_dataset, tmp_path, capsys):
    out = tmp_path / "crops"
    assert main(["prepare", "--manifest", str(tiny_dataset), "--out", str(out), "--size", "32"]) == 0
    assert (out / "pairs.json").exists()

    fgap_dir = tmp_path / "features"
    for kind, name in (("defect", "defect.fgap"), ("normal_fg", "fg.fgap")):
        code = main(
            ["pixel-features", "--pairs", str(out / "pairs.json"), "--kind", kind,
             "--out", str(fgap_dir / name)]
        )
        assert code == 0

    measure_out = tmp_path / "m.json"
    code = main(
        ["measure", "--defect", str(fgap_dir / "defect.fgap"), "--normal",
         str(fgap_dir / "fg.fgap"), "--metrics", "js", "--out", str(measure_out)]
    )
    assert code == 0
    payload = json.loads(measure_out.read_text())
    assert [r["metric"] for r in payload["results"]] == ["JS"]

    assert main(["verify-bounds", "--in", str(measure_out)]) == 0
    assert "JS: pass" in capsys.readouterr().out

    rmi_out = tmp_path / "rmi.csv"
    assert main(["rmi", "--pairs", str(out / "pairs.json"), "--out", str(rmi_out)]) == 0
    assert rmi_out.read_text().splitlines()[0].startswith("sample_id,")


def test_measure_metrics_filter(tiny_dataset, tmp_path):
    rng = np.random.default_rng(0)
    ids = tuple(f"s{i}" for i in range(4))
    for name, kind in (("d.fgap", "defect"), ("n.fgap", "normal_fg")):
        write_features(
            FeatureMatrix(rng.normal(size=(4, 6)).astype(np.float32), ids, BackboneMeta(kind=kind)),
            tmp_path / name,
        )
    out = tmp_path / "out.json"
    assert main(
        ["measure", "--defect", str(tmp_path / "d.fgap"), "--normal", str(tmp_path / "n.fgap"),
         "--metrics", "js,ws", "--out", str(out)]
    ) == 0
    metrics = [r["metric"] for r in json.loads(out.read_text())["results"]]
    assert metrics == ["JS", "WS"]


def test_measure_unknown_metric_is_usage_error(tmp_path):
    code = main(
        ["measure", "--defect", "x", "--normal", "y", "--metrics", "zz", "--out",
         str(tmp_path / "o.json")]
    )
    assert code == 2


def test_missing_file_is_io_error(tmp_path):
    code = main(["rmi", "--pairs", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.csv")])
    assert code == 3


def test_validation_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    code = main(["rmi", "--pairs", str(bad), "--out", str(tmp_path / "o.csv")])
    assert code == 4


def test_ttest_csv_flow(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("value\n" + "\n".join(str(0.1 * i) for i in range(10)))
    b.write_text("\n".join(str(2.0 + 0.1 * i) for i in range(10)))
    out = tmp_path / "t.json"
    assert main(["ttest", "--group-a", str(a), "--group-b", str(b), "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["result"]["decision"] == "reject_H0"
    assert payload["n1"] == 10


def test_export_embeddings_cli(tmp_path):
    rng = np.random.default_rng(1)
    paths = []
    for i, kind in enumerate(("defect", "normal_fg")):
        path = tmp_path / f"{kind}.fgap"
        write_features(
            FeatureMatrix(
                rng.normal(size=(3, 8)).astype(np.float32),
                tuple(f"s{j}" for j in range(3)),
                BackboneMeta(kind=kind),
            ),
            path,
        )
        paths.append(str(path))
    out = tmp_path / "emb.csv"
    assert main(["export-embeddings", "--in", *paths, "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 7


def test_seed_env_override(tiny_dataset, tmp_path, monkeypatch):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    out_c = tmp_path / "c"
    monkeypatch.setenv("REPGAP_SEED", "99")
    main(["prepare", "--manifest", str(tiny_dataset), "--out", str(out_a), "--size", "32"])
    monkeypatch.delenv("REPGAP_SEED")
    main(["prepare", "--manifest", str(tiny_dataset), "--out", str(out_b), "--size", "32",
          "--seed", "99"])
    monkeypatch.setenv("REPGAP_SEED", "123")
    main(["prepare", "--manifest", str(tiny_dataset), "--out", str(out_c), "--size", "32",
          "--seed", "99"])
    index_a = json.loads((out_a / "pairs.json").read_text())
    index_b = json.loads((out_b / "pairs.json").read_text())
    index_c = json.loads((out_c / "pairs.json").read_text())
    assert index_a["seed"] == index_b["seed"] == index_c["seed"] == 99
    assert [p["seed_used"] for p in index_a["pairs"]] == [p["seed_used"] for p in index_b["pairs"]]
