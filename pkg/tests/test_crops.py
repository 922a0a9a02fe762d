import numpy as np
import pytest

from repgap.corpus import (
    best_fit_bbox,
    build_crop_sets,
    crop_patch,
    load_manifest,
    normalize_patch,
    paired_bg_crop,
    paired_fg_crop,
    rasterize_region,
)
from repgap.corpus.crops import FLAG_RELAXED_OVERLAP
from repgap.corpus.types import Box, ImageRecord, PixelPatch, RegionAnnotation
from repgap.errors import ValidationError
from tests.conftest import write_image


def patch_from(array: np.ndarray) -> PixelPatch:
    if array.ndim == 2:
        array = array[:, :, None]
    return PixelPatch(pixels=array.astype(np.uint8), original_size=array.shape[:2])


# ---------------------------------------------------------------------------
# best_fit_bbox
# ---------------------------------------------------------------------------

def test_mask_best_fit(tmp_path):
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[2, 3] = 255
    mask[5, 7] = 255
    write_image(tmp_path / "m.png", mask)
    region = RegionAnnotation("mask_path", "m.png", "c")
    assert best_fit_bbox(region, (10, 10), tmp_path) == Box(2, 3, 5, 7)


def test_bbox_returned_unchanged():
    region = RegionAnnotation("bbox", Box(1, 2, 3, 4), "c")
    assert best_fit_bbox(region) == Box(1, 2, 3, 4)


def test_empty_mask_errors(tmp_path):
    write_image(tmp_path / "m.png", np.zeros((8, 8), dtype=np.uint8))
    region = RegionAnnotation("mask_path", "m.png", "c")
    with pytest.raises(ValidationError, match="empty annotation"):
        best_fit_bbox(region, (8, 8), tmp_path)


def test_polygon_bbox_matches_pixel_scan_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        n_vertices = int(rng.integers(3, 8))
        vertices = tuple(
            (int(rng.integers(0, 30)), int(rng.integers(0, 30))) for _ in range(n_vertices)
        )
        region = RegionAnnotation("polygon", vertices, "c")
        mask = rasterize_region(region, (30, 30), ".")
        if not mask.any():
            continue
        # oracle: exhaustive scan over every pixel
        rows = [r for r in range(30) for c in range(30) if mask[r, c]]
        cols = [c for r in range(30) for c in range(30) if mask[r, c]]
        expected = Box(min(rows), min(cols), max(rows), max(cols))
        assert best_fit_bbox(region, (30, 30)) == expected


# ---------------------------------------------------------------------------
# paired placement
# ---------------------------------------------------------------------------

FULL_FG_RECORD = ImageRecord(
    image_path="x.png",
    object_type="t",
    defect_regions=(RegionAnnotation("bbox", Box(0, 0, 9, 9), "d"),),
)


def test_fg_crop_seeded_golden():
    box, flags = paired_fg_crop(FULL_FG_RECORD, Box(0, 0, 9, 9), 42, (100, 100))
    assert box == Box(8, 11, 17, 20)
    assert flags == ()
    assert box.iou(Box(0, 0, 9, 9)) == 0.0


def test_fg_crop_deterministic():
    first, _ = paired_fg_crop(FULL_FG_RECORD, Box(0, 0, 9, 9), 7, (100, 100))
    second, _ = paired_fg_crop(FULL_FG_RECORD, Box(0, 0, 9, 9), 7, (100, 100))
    assert first == second
    other, _ = paired_fg_crop(FULL_FG_RECORD, Box(0, 0, 9, 9), 8, (100, 100))
    assert other != first


def test_fg_crop_impossible_when_defect_covers_foreground():
    record = ImageRecord(
        image_path="x.png",
        object_type="t",
        defect_regions=(RegionAnnotation("bbox", Box(0, 0, 19, 19), "d"),),
        foreground_region=RegionAnnotation("bbox", Box(0, 0, 19, 19)),
    )
    with pytest.raises(ValidationError, match="no anomaly-free placement"):
        paired_fg_crop(record, Box(0, 0, 19, 19), 1, (20, 20))


def test_fg_crop_relaxed_overlap_flagged():
    # a 10x10 defect in a 10x19 foreground: zero overlap is impossible but
    # the rightmost placement keeps IoU near 0.05
    record = ImageRecord(
        image_path="x.png",
        object_type="t",
        defect_regions=(RegionAnnotation("bbox", Box(0, 0, 9, 9), "d"),),
        foreground_region=RegionAnnotation("bbox", Box(0, 0, 9, 18)),
    )
    box, flags = paired_fg_crop(record, Box(0, 0, 9, 9), 3, (12, 40))
    assert FLAG_RELAXED_OVERLAP in flags
    assert 0.0 < box.iou(Box(0, 0, 9, 9)) <= 0.10


def test_bg_crop_lands_outside_foreground():
    record = ImageRecord(
        image_path="x.png",
        object_type="t",
        defect_regions=(RegionAnnotation("bbox", Box(10, 10, 17, 17), "d"),),
        foreground_region=RegionAnnotation("bbox", Box(0, 0, 99, 49)),
    )
    box = paired_bg_crop(record, Box(10, 10, 17, 17), 7, (100, 100))
    assert box == Box(87, 87, 94, 94)
    assert box.col0 >= 50
    assert paired_bg_crop(record, Box(10, 10, 17, 17), 7, (100, 100)) == box


def test_bg_crop_without_background_errors():
    with pytest.raises(ValidationError, match="no background available"):
        paired_bg_crop(FULL_FG_RECORD, Box(0, 0, 9, 9), 1, (100, 100))


# ---------------------------------------------------------------------------
# normalize_patch
# ---------------------------------------------------------------------------

def test_normalize_resizes_and_centers():
    patch = patch_from(np.full((30, 20, 3), 200))
    out = normalize_patch(patch, 64)
    assert out.pixels.shape == (64, 64, 3)
    content_cols = np.flatnonzero(out.pixels.any(axis=(0, 2)))
    content_rows = np.flatnonzero(out.pixels.any(axis=(1, 2)))
    assert len(content_rows) == 64
    assert len(content_cols) == 43  # round(20 * 64 / 30)
    assert content_cols[0] == (64 - 43) // 2


def test_normalize_identity_on_target_size():
    rng = np.random.default_rng(5)
    patch = patch_from(rng.integers(1, 256, size=(64, 64, 3)))
    out = normalize_patch(patch, 64)
    assert np.array_equal(out.pixels, patch.pixels)


def test_normalize_pads_exactly_zero():
    patch = patch_from(np.full((10, 30), 255))
    out = normalize_patch(patch, 60)
    content = out.pixels[out.pixels != 0]
    assert (content == 255).all()
    pad_area = out.pixels.size - content.size
    assert pad_area == (60 * 60 - 60 * 20) * 1
    assert out.pixels.shape == (60, 60, 1)


def test_normalize_idempotent():
    rng = np.random.default_rng(6)
    patch = patch_from(rng.integers(1, 256, size=(25, 40, 3)))
    once = normalize_patch(patch, 64)
    twice = normalize_patch(once, 64)
    assert once.equals(twice)


def test_normalize_rejects_tiny_target():
    with pytest.raises(ValidationError, match=">= 8"):
        normalize_patch(patch_from(np.zeros((4, 4))), 4)


def test_crop_patch_clips_and_pads():
    image = np.arange(100, dtype=np.uint8).reshape(10, 10)[:, :, None]
    patch = crop_patch(image, Box(-2, -2, 3, 3))
    assert patch.pixels.shape == (6, 6, 1)
    assert (patch.pixels[:2, :, 0] == 0).all()
    assert (patch.pixels[:, :2, 0] == 0).all()
    assert patch.pixels[2, 2, 0] == 0 == image[0, 0, 0]
    assert patch.pixels[3, 3, 0] == image[1, 1, 0]


# ---------------------------------------------------------------------------
# build_crop_sets
# ---------------------------------------------------------------------------

def test_build_crop_sets_counts(tiny_dataset):
    manifest = load_manifest(tiny_dataset)
    result = build_crop_sets(manifest, 32, seed=42)
    assert len(result.pairs) == 2
    assert not result.skips
    for pair in result.pairs:
        assert pair.defect_crop.pixels.shape == pair.normal_fg_crop.pixels.shape
        if pair.background_crop is not None:
            assert pair.background_crop.pixels.shape == pair.defect_crop.pixels.shape
        assert pair.normal_fg_box.height == pair.defect_box.height
        assert pair.normal_fg_box.width == pair.defect_box.width
        assert pair.normal_fg_box.iou(pair.defect_box) == 0.0


def test_build_crop_sets_skips_impossible(tmp_path):
    import json

    rng = np.random.default_rng(1)
    write_image(tmp_path / "a.png", rng.integers(0, 256, size=(30, 30, 3)))
    manifest = {
        "schema_version": "1",
        "dataset_name": "t",
        "root": ".",
        "anomaly_classes": ["c"],
        "records": [
            {
                "image_path": "a.png",
                "object_type": "o",
                "foreground_region": {
                    "kind": "bbox",
                    "payload": {"row": 0, "col": 0, "height": 10, "width": 10},
                },
                "defect_regions": [
                    {
                        "kind": "bbox",
                        "payload": {"row": 0, "col": 0, "height": 10, "width": 10},
                        "anomaly_class": "c",
                    },
                    {
                        "kind": "bbox",
                        "payload": {"row": 0, "col": 0, "height": 2, "width": 2},
                        "anomaly_class": "c",
                    },
                ],
            }
        ],
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    result = build_crop_sets(load_manifest(path), 16, seed=42)
    # the full-foreground defect cannot get a companion; the small one can
    assert len(result.pairs) == 1
    assert len(result.skips) == 1
    assert "no anomaly-free placement" in result.skips[0].reason


def test_build_crop_sets_deterministic(tiny_dataset):
    manifest = load_manifest(tiny_dataset)
    first = build_crop_sets(manifest, 32, seed=9)
    second = build_crop_sets(manifest, 32, seed=9)
    assert len(first.pairs) == len(second.pairs)
    for a, b in zip(first.pairs, second.pairs):
        assert a.seed_used == b.seed_used
        assert a.normal_fg_box == b.normal_fg_box
        assert np.array_equal(a.defect_crop.pixels, b.defect_crop.pixels)
        assert np.array_equal(a.normal_fg_crop.pixels, b.normal_fg_crop.pixels)
    third = build_crop_sets(manifest, 32, seed=10)
    assert any(
        a.normal_fg_box != b.normal_fg_box for a, b in zip(first.pairs, third.pairs)
    )
