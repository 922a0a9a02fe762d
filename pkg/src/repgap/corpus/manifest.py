"""Annotation manifest: a strict JSON index of images and their regions.

Schema (version "1"):

.. code-block:: json

    {
      "schema_version": "1",
      "dataset_name": "mvtec",
      "root": ".",
      "anomaly_classes": ["hole", "crack"],
      "records": [
        {
          "image_path": "wood/test/hole/000.png",
          "object_type": "wood",
          "foreground_region": null,
          "defect_regions": [
            {"kind": "mask_path",
             "payload": "wood/ground_truth/hole/000_mask.png",
             "anomaly_class": "hole"}
          ]
        }
      ]
    }

``root`` resolves relative to the manifest file location; every image and
mask path resolves relative to ``root``. A null ``foreground_region``
declares the whole image as foreground. Unknown fields are rejected.

Region payloads by kind: ``bbox`` is an object with integer ``row``,
``col``, ``height``, ``width`` (height and width at least 1); ``polygon``
is a list of at least 3 ``[row, col]`` vertices; ``mask_path`` is a path
string, and the mask image must match the annotated image pixel for pixel
in size.
"""

from __future__ import annotations

import json
from pathlib import Path, PurePosixPath

from PIL import Image, UnidentifiedImageError

from repgap.corpus.types import (
    VALID_REGION_KINDS,
    AnnotationManifest,
    Box,
    ImageRecord,
    RegionAnnotation,
)
from repgap.errors import InputOutputError, ValidationError

SCHEMA_VERSION = "1"

_TOP_KEYS = {"schema_version", "dataset_name", "root", "anomaly_classes", "records"}
_RECORD_KEYS = {"image_path", "object_type", "foreground_region", "defect_regions"}
_REGION_KEYS = {"kind", "payload", "anomaly_class"}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ValidationError(f"{where}: unknown fields {unknown}")


def _parse_region(obj: object, where: str) -> RegionAnnotation:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where}: region must be an object")
    _reject_unknown(obj, _REGION_KEYS, where)
    kind = obj.get("kind")
    if kind not in VALID_REGION_KINDS:
        raise ValidationError(f"{where}: kind must be one of {VALID_REGION_KINDS}, got {kind!r}")
    payload = obj.get("payload")
    anomaly_class = obj.get("anomaly_class")
    if anomaly_class is not None and not isinstance(anomaly_class, str):
        raise ValidationError(f"{where}: anomaly_class must be a string")

    if kind == "bbox":
        if not isinstance(payload, dict) or set(payload) != {"row", "col", "height", "width"}:
            raise ValidationError(f"{where}: bbox payload needs row/col/height/width")
        vals = {k: payload[k] for k in ("row", "col", "height", "width")}
        if not all(isinstance(v, int) for v in vals.values()):
            raise ValidationError(f"{where}: bbox payload must be integer pixel coordinates")
        if vals["height"] < 1 or vals["width"] < 1:
            raise ValidationError(f"{where}: degenerate bbox (height and width must be >= 1)")
        box = Box(vals["row"], vals["col"], vals["row"] + vals["height"] - 1, vals["col"] + vals["width"] - 1)
        return RegionAnnotation(kind="bbox", payload=box, anomaly_class=anomaly_class)

    if kind == "polygon":
        if not isinstance(payload, list) or len(payload) < 3:
            raise ValidationError(f"{where}: polygon needs at least 3 vertices")
        vertices = []
        for vtx in payload:
            if (
                not isinstance(vtx, list)
                or len(vtx) != 2
                or not all(isinstance(v, int) for v in vtx)
            ):
                raise ValidationError(f"{where}: polygon vertices must be [row, col] integer pairs")
            vertices.append((vtx[0], vtx[1]))
        return RegionAnnotation(kind="polygon", payload=tuple(vertices), anomaly_class=anomaly_class)

    if not isinstance(payload, str) or not payload:
        raise ValidationError(f"{where}: mask_path payload must be a non-empty path string")
    return RegionAnnotation(kind="mask_path", payload=payload, anomaly_class=anomaly_class)


def _image_size(path: Path) -> tuple[int, int]:
    """(height, width) from the image header, without decoding pixels."""
    try:
        with Image.open(path) as img:
            w, h = img.size
    except FileNotFoundError:
        raise InputOutputError(f"image not found: {path}")
    except UnidentifiedImageError:
        raise InputOutputError(f"not a readable image: {path}")
    return (h, w)


def _validate_record(record: ImageRecord, root: Path, classes: set[str], where: str) -> None:
    image_path = root / record.image_path
    h, w = _image_size(image_path)
    for idx, region in enumerate(record.defect_regions):
        if region.anomaly_class is None:
            raise ValidationError(f"{where}: defect region #{idx} lacks an anomaly_class")
        if region.anomaly_class not in classes:
            raise ValidationError(
                f"{where}: anomaly_class {region.anomaly_class!r} not in declared classes"
            )
        _validate_region_geometry(region, root, (h, w), f"{where} defect region #{idx}")
    if record.foreground_region is not None:
        _validate_region_geometry(record.foreground_region, root, (h, w), f"{where} foreground")


def _validate_region_geometry(
    region: RegionAnnotation, root: Path, image_size: tuple[int, int], where: str
) -> None:
    if region.kind == "mask_path":
        mask_size = _image_size(root / str(region.payload))
        if mask_size != image_size:
            raise ValidationError(
                f"{where}: mask size {mask_size} differs from image size {image_size}"
            )


def parse_manifest_dict(data: object, base_dir: Path, source: str) -> AnnotationManifest:
    """Validate a decoded manifest document and build the typed form."""
    if not isinstance(data, dict):
        raise ValidationError(f"{source}: manifest must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, source)
    missing = sorted(_TOP_KEYS - set(data))
    if missing:
        raise ValidationError(f"{source}: missing fields {missing}")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ValidationError(
            f"{source}: unsupported schema_version {data['schema_version']!r}"
        )
    if not isinstance(data["dataset_name"], str) or not data["dataset_name"]:
        raise ValidationError(f"{source}: dataset_name must be a non-empty string")
    if not isinstance(data["root"], str):
        raise ValidationError(f"{source}: root must be a path string")
    classes_field = data["anomaly_classes"]
    if not isinstance(classes_field, list) or not all(isinstance(c, str) for c in classes_field):
        raise ValidationError(f"{source}: anomaly_classes must be a list of strings")
    classes = tuple(classes_field)
    if len(set(classes)) != len(classes):
        raise ValidationError(f"{source}: anomaly_classes contains duplicates")

    root = (base_dir / data["root"]).resolve()
    if not root.is_dir():
        raise InputOutputError(f"{source}: root directory not found: {root}")

    if not isinstance(data["records"], list):
        raise ValidationError(f"{source}: records must be a list")
    records = []
    class_set = set(classes)
    for i, rec in enumerate(data["records"]):
        where = f"{source} record #{i}"
        if not isinstance(rec, dict):
            raise ValidationError(f"{where}: must be an object")
        _reject_unknown(rec, _RECORD_KEYS, where)
        if not isinstance(rec.get("image_path"), str) or not rec["image_path"]:
            raise ValidationError(f"{where}: image_path must be a non-empty string")
        if not isinstance(rec.get("object_type"), str) or not rec["object_type"]:
            raise ValidationError(f"{where}: object_type must be a non-empty string")
        raw_defects = rec.get("defect_regions", [])
        if not isinstance(raw_defects, list):
            raise ValidationError(f"{where}: defect_regions must be a list")
        defects = tuple(
            _parse_region(r, f"{where} defect region #{j}") for j, r in enumerate(raw_defects)
        )
        fg_raw = rec.get("foreground_region")
        foreground = None if fg_raw is None else _parse_region(fg_raw, f"{where} foreground")
        record = ImageRecord(
            image_path=rec["image_path"],
            object_type=rec["object_type"],
            defect_regions=defects,
            foreground_region=foreground,
        )
        _validate_record(record, root, class_set, where)
        records.append(record)

    return AnnotationManifest(
        dataset_name=data["dataset_name"],
        schema_version=SCHEMA_VERSION,
        root=str(root),
        anomaly_classes=classes,
        records=tuple(records),
    )


def load_manifest(path: str | Path) -> AnnotationManifest:
    """Load and fully validate a manifest JSON file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputOutputError(f"manifest not found: {path}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})")
    return parse_manifest_dict(data, path.parent, str(path))


def _region_to_dict(region: RegionAnnotation) -> dict:
    if region.kind == "bbox":
        box = region.payload
        payload = {"row": box.row0, "col": box.col0, "height": box.height, "width": box.width}
    elif region.kind == "polygon":
        payload = [[r, c] for r, c in region.payload]
    else:
        payload = str(region.payload)
    out: dict = {"kind": region.kind, "payload": payload}
    if region.anomaly_class is not None:
        out["anomaly_class"] = region.anomaly_class
    return out


def manifest_to_dict(manifest: AnnotationManifest) -> dict:
    return {
        "schema_version": manifest.schema_version,
        "dataset_name": manifest.dataset_name,
        "root": str(PurePosixPath(Path(manifest.root).as_posix())),
        "anomaly_classes": list(manifest.anomaly_classes),
        "records": [
            {
                "image_path": rec.image_path,
                "object_type": rec.object_type,
                "foreground_region": None
                if rec.foreground_region is None
                else _region_to_dict(rec.foreground_region),
                "defect_regions": [_region_to_dict(r) for r in rec.defect_regions],
            }
            for rec in manifest.records
        ],
    }


def save_manifest(manifest: AnnotationManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(manifest_to_dict(manifest), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
