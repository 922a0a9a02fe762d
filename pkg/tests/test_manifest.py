import json

import pytest

from repgap.corpus import load_manifest, save_manifest
from repgap.corpus.types import Box
from repgap.errors import InputOutputError, ValidationError


def test_loads_two_record_manifest(tiny_dataset):
    manifest = load_manifest(tiny_dataset)
    assert manifest.dataset_name == "tiny"
    assert len(manifest.records) == 2
    assert manifest.records[0].defect_regions[0].payload == Box(3, 4, 8, 10)
    assert manifest.records[1].defect_regions[0].kind == "mask_path"


def test_degenerate_bbox_rejected(tiny_dataset):
    data = json.loads(tiny_dataset.read_text())
    data["records"][0]["defect_regions"][0]["payload"]["width"] = 0
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="degenerate bbox"):
        load_manifest(tiny_dataset)


def test_unknown_fields_rejected(tiny_dataset):
    data = json.loads(tiny_dataset.read_text())
    data["extra"] = 1
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="unknown fields"):
        load_manifest(tiny_dataset)


def test_unknown_record_field_rejected(tiny_dataset):
    data = json.loads(tiny_dataset.read_text())
    data["records"][0]["surprise"] = True
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="unknown fields"):
        load_manifest(tiny_dataset)


def test_missing_image_is_io_error(tiny_dataset):
    data = json.loads(tiny_dataset.read_text())
    data["records"][0]["image_path"] = "nope.png"
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(InputOutputError, match="nope.png"):
        load_manifest(tiny_dataset)


def test_undeclared_class_rejected(tiny_dataset):
    data = json.loads(tiny_dataset.read_text())
    data["records"][0]["defect_regions"][0]["anomaly_class"] = "mystery"
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="mystery"):
        load_manifest(tiny_dataset)


def test_polygon_needs_three_vertices(tiny_dataset):
    data = json.loads(tiny_dataset.read_text())
    data["records"][0]["defect_regions"][0] = {
        "kind": "polygon",
        "payload": [[0, 0], [5, 5]],
        "anomaly_class": "scuff",
    }
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="3 vertices"):
        load_manifest(tiny_dataset)


def test_mask_size_mismatch_rejected(tiny_dataset, tmp_path):
    import numpy as np

    from tests.conftest import write_image

    write_image(tiny_dataset.parent / "small_mask.png", np.zeros((10, 10), dtype=np.uint8))
    data = json.loads(tiny_dataset.read_text())
    data["records"][1]["defect_regions"][0]["payload"] = "small_mask.png"
    tiny_dataset.write_text(json.dumps(data))
    with pytest.raises(ValidationError, match="mask size"):
        load_manifest(tiny_dataset)


def test_save_load_roundtrip(tiny_dataset, tmp_path):
    manifest = load_manifest(tiny_dataset)
    out = tiny_dataset.parent / "copy.json"
    save_manifest(manifest, out)
    again = load_manifest(out)
    assert again == manifest
