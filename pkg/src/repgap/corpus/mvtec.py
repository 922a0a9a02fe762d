"""Adapter for MVTec-AD style directory layouts.

Expected tree for one object type::

    <root>/<object_type>/test/<anomaly_class>/*.png
    <root>/<object_type>/ground_truth/<anomaly_class>/<stem>_mask.png

Test images in ``good`` carry no defect annotations. Ground-truth masks
are optional per image; when a mask is missing the image is kept with an
empty defect list. The whole image is treated as foreground since the
layout carries no foreground masks.
"""

from __future__ import annotations

from pathlib import Path

from repgap.corpus.manifest import SCHEMA_VERSION, _image_size
from repgap.corpus.types import AnnotationManifest, ImageRecord, RegionAnnotation
from repgap.errors import InputOutputError, ValidationError

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


def _list_images(folder: Path) -> list[Path]:
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def adapt_mvtec(root: str | Path, object_type: str) -> AnnotationManifest:
    """Build a manifest for one object type of an MVTec-AD style tree."""
    root = Path(root).resolve()
    test_dir = root / object_type / "test"
    if not test_dir.is_dir():
        found = sorted(p.name for p in (root / object_type).iterdir()) if (root / object_type).is_dir() else []
        raise InputOutputError(
            f"layout mismatch: expected {test_dir}, found under {root / object_type}: {found or 'nothing'}"
        )
    gt_dir = root / object_type / "ground_truth"

    class_dirs = sorted(p for p in test_dir.iterdir() if p.is_dir())
    if not class_dirs:
        raise InputOutputError(f"layout mismatch: expected class folders under {test_dir}, found none")

    records: list[ImageRecord] = []
    classes: set[str] = set()
    for class_dir in class_dirs:
        anomaly_class = class_dir.name
        for image_path in _list_images(class_dir):
            rel_image = image_path.relative_to(root).as_posix()
            defects: tuple[RegionAnnotation, ...] = ()
            if anomaly_class != "good":
                mask_path = gt_dir / anomaly_class / f"{image_path.stem}_mask{image_path.suffix}"
                if mask_path.is_file():
                    if _image_size(mask_path) != _image_size(image_path):
                        raise ValidationError(
                            f"{rel_image}: ground-truth mask size differs from image size"
                        )
                    defects = (
                        RegionAnnotation(
                            kind="mask_path",
                            payload=mask_path.relative_to(root).as_posix(),
                            anomaly_class=anomaly_class,
                        ),
                    )
                    classes.add(anomaly_class)
            records.append(
                ImageRecord(
                    image_path=rel_image,
                    object_type=object_type,
                    defect_regions=defects,
                    foreground_region=None,
                )
            )

    return AnnotationManifest(
        dataset_name="mvtec",
        schema_version=SCHEMA_VERSION,
        root=str(root),
        anomaly_classes=tuple(sorted(classes)),
        records=tuple(records),
    )
