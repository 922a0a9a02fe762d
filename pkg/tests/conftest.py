"""Shared fixtures: tiny on-disk datasets and directory hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from repgap.corpus.manifest import SCHEMA_VERSION


def write_image(path: Path, array: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if array.ndim == 2:
        Image.fromarray(array.astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray(array.astype(np.uint8), mode="RGB").save(path)


def hash_tree(root: Path) -> dict[str, str]:
    """Relative path -> sha256 of content, for whole-tree comparisons."""
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


@pytest.fixture
def tiny_dataset(tmp_path: Path) -> Path:
    """Two annotated images: one bbox defect, one mask defect."""
    root = tmp_path / "data"
    rng = np.random.default_rng(0)
    img0 = rng.integers(0, 256, size=(40, 50, 3), dtype=np.uint8)
    write_image(root / "img0.png", img0)
    img1 = rng.integers(0, 256, size=(40, 50, 3), dtype=np.uint8)
    write_image(root / "img1.png", img1)
    mask = np.zeros((40, 50), dtype=np.uint8)
    mask[5:12, 8:20] = 255
    write_image(root / "mask1.png", mask)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "dataset_name": "tiny",
        "root": ".",
        "anomaly_classes": ["scuff", "dent"],
        "records": [
            {
                "image_path": "img0.png",
                "object_type": "plate",
                "foreground_region": None,
                "defect_regions": [
                    {
                        "kind": "bbox",
                        "payload": {"row": 3, "col": 4, "height": 6, "width": 7},
                        "anomaly_class": "scuff",
                    }
                ],
            },
            {
                "image_path": "img1.png",
                "object_type": "plate",
                "foreground_region": None,
                "defect_regions": [
                    {"kind": "mask_path", "payload": "mask1.png", "anomaly_class": "dent"}
                ],
            },
        ],
    }
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
    return manifest_path


@pytest.fixture(scope="session")
def synthetic_fixture(tmp_path_factory) -> Path:
    """Bundled three-class fixture used by pipeline-level tests."""
    from repgap.synthetic import generate_dataset

    out = tmp_path_factory.mktemp("synthetic")
    return generate_dataset(out, seed=42, images_per_class=4, defects_per_image=2)


@pytest.fixture(scope="session")
def hypothesis_fixture(tmp_path_factory) -> Path:
    """Larger fixture: 30 defects per class for the direction property."""
    from repgap.synthetic import generate_dataset

    out = tmp_path_factory.mktemp("synthetic30")
    return generate_dataset(out, seed=42, images_per_class=10, defects_per_image=3)
