"""Synthetic inspection fixture: textured panels with painted defects.

Each image is an independent-noise background with a textured foreground
rectangle. Defects are noisy copies of the foreground texture, deformed
per class, so defect patches stay statistically close to the anomaly-free
foreground while the background stays unrelated. Three defect classes are
painted: blotch (filled ellipse), scratch (thin band) and speckle
(scattered dots). Ground truth is written as one binary mask per defect.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from repgap.corpus.manifest import SCHEMA_VERSION, save_manifest
from repgap.corpus.types import (
    AnnotationManifest,
    Box,
    ImageRecord,
    RegionAnnotation,
)

CLASSES = ("blotch", "scratch", "speckle")
OBJECT_TYPE = "panel"


def _smooth_texture(rng: np.random.Generator, h: int, w: int, cell: int = 24) -> np.ndarray:
    """Correlated RGB texture in [0, 255]: a dominant vertical
    illumination ramp, low-resolution blobs and mild sensor noise. The
    ramp gives every crop of the same image a shared coarse structure."""
    coarse = rng.uniform(-20, 20, size=(h // cell + 2, w // cell + 2, 3))
    img = Image.fromarray((coarse + 128).astype(np.uint8), mode="RGB").resize(
        (w, h), Image.Resampling.BILINEAR
    )
    blobs = np.asarray(img, dtype=np.float64) - 128.0
    ramp = np.linspace(70, 200, h)[:, None, None]
    return np.clip(ramp + blobs + rng.normal(0, 5, size=(h, w, 3)), 0, 255)


def _defect_mask(rng: np.random.Generator, cls: str, dh: int, dw: int) -> np.ndarray:
    yy, xx = np.mgrid[0:dh, 0:dw]
    if cls == "blotch":
        cy, cx = (dh - 1) / 2, (dw - 1) / 2
        mask = ((yy - cy) / (dh / 2)) ** 2 + ((xx - cx) / (dw / 2)) ** 2 <= 1.0
    elif cls == "scratch":
        t = yy * (dw - 1) - xx * (dh - 1)
        mask = np.abs(t) <= max(dh, dw) * 1.5
    else:
        mask = rng.random((dh, dw)) < 0.3
    if not mask.any():
        mask[dh // 2, dw // 2] = True
    return mask


def _paint_defect(
    rng: np.random.Generator,
    image: np.ndarray,
    fg_box: Box,
    cls: str,
    taken: list[Box],
) -> tuple[Box, np.ndarray] | None:
    dh = int(rng.integers(16, 28))
    dw = int(rng.integers(16, 28))
    if cls == "scratch":
        dh, dw = max(8, dh // 2), min(dw + 8, 32)
    for _ in range(60):
        r0 = int(rng.integers(fg_box.row0, fg_box.row1 - dh + 2))
        c0 = int(rng.integers(fg_box.col0, fg_box.col1 - dw + 2))
        box = Box(r0, c0, r0 + dh - 1, c0 + dw - 1)
        if all(box.intersection_area(t) == 0 for t in taken):
            break
    else:
        return None

    # source texture patch copied from the same rows at other columns,
    # lightly perturbed: the defect stays a noisy copy of the anomaly-free
    # pattern and keeps the illumination phase of its location
    sc = int(rng.integers(fg_box.col0, fg_box.col1 - dw + 2))
    source = image[box.row0 : box.row1 + 1, sc : sc + dw].astype(np.float64)
    noisy = source + rng.normal(0, 8, size=source.shape)
    if cls == "blotch":
        noisy *= 0.85
    elif cls == "scratch":
        noisy *= 0.78
    else:
        noisy = np.clip(noisy * 1.12 + 6, 0, 255)

    mask = _defect_mask(rng, cls, dh, dw)
    region = image[box.row0 : box.row1 + 1, box.col0 : box.col1 + 1]
    region[mask] = np.clip(noisy, 0, 255).astype(np.uint8)[mask]
    return box, mask


def generate_dataset(
    out_dir: str | Path,
    seed: int = 42,
    images_per_class: int = 6,
    defects_per_image: int = 1,
    image_size: int = 160,
    foreground_margin: int = 34,
) -> Path:
    """Write images, masks and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    fg_box = Box(
        foreground_margin,
        foreground_margin,
        image_size - foreground_margin - 1,
        image_size - foreground_margin - 1,
    )
    records = []
    for cls_idx, cls in enumerate(CLASSES):
        for img_idx in range(images_per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, cls_idx, img_idx])
            )
            image = rng.integers(0, 256, size=(image_size, image_size, 3), dtype=np.uint8)
            texture = _smooth_texture(rng, fg_box.height, fg_box.width)
            image[fg_box.row0 : fg_box.row1 + 1, fg_box.col0 : fg_box.col1 + 1] = (
                texture.astype(np.uint8)
            )

            taken: list[Box] = []
            regions = []
            for defect_idx in range(defects_per_image):
                painted = _paint_defect(rng, image, fg_box, cls, taken)
                if painted is None:
                    continue
                box, dmask = painted
                taken.append(box)
                mask = np.zeros((image_size, image_size), dtype=np.uint8)
                mask[box.row0 : box.row1 + 1, box.col0 : box.col1 + 1] = (
                    dmask.astype(np.uint8) * 255
                )
                mask_name = f"masks/{cls}_{img_idx:03d}_{defect_idx}.png"
                Image.fromarray(mask, mode="L").save(out_dir / mask_name)
                regions.append(
                    RegionAnnotation(kind="mask_path", payload=mask_name, anomaly_class=cls)
                )

            image_name = f"images/{cls}_{img_idx:03d}.png"
            Image.fromarray(image, mode="RGB").save(out_dir / image_name)
            records.append(
                ImageRecord(
                    image_path=image_name,
                    object_type=OBJECT_TYPE,
                    defect_regions=tuple(regions),
                    foreground_region=RegionAnnotation(kind="bbox", payload=fg_box),
                )
            )

    manifest = AnnotationManifest(
        dataset_name="synthetic3",
        schema_version=SCHEMA_VERSION,
        root=str(out_dir.resolve()),
        anomaly_classes=CLASSES,
        records=tuple(records),
    )
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)
    return manifest_path


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "synthetic_fixture"
    path = generate_dataset(target)
    print(path)
