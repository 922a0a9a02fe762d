"""Crop extraction: best-fit defect boxes, paired companion placement,
shape normalization and crop-set assembly.

Placement policy for the anomaly-free companion crop: candidate positions
are sampled uniformly from the set of box positions that lie fully inside
the declared foreground. Up to 1000 seeded attempts must not touch any
defect box at all; a further 1000 attempts tolerate IoU up to 0.10 with
the sampled crop flagged ``relaxed-overlap``. After that the region is
reported as unplaceable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, UnidentifiedImageError

from repgap.corpus.types import (
    AnnotationManifest,
    Box,
    CropPair,
    ImageRecord,
    PixelPatch,
    RegionAnnotation,
    SkipEntry,
)
from repgap.errors import InputOutputError, ValidationError

MAX_STRICT_ATTEMPTS = 1000
MAX_RELAXED_ATTEMPTS = 1000
RELAXED_IOU = 0.10

FLAG_RELAXED_OVERLAP = "relaxed-overlap"
FLAG_NO_BACKGROUND = "no-background"


def load_image_array(path: str | Path) -> np.ndarray:
    """Decode an image to a (H, W, C) uint8 array, C = 1 or 3."""
    try:
        with Image.open(path) as img:
            if img.mode in ("L", "I;16", "I"):
                arr = np.asarray(img.convert("L"), dtype=np.uint8)[:, :, None]
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise InputOutputError(f"image not found: {path}")
    except UnidentifiedImageError:
        raise InputOutputError(f"not a readable image: {path}")
    return arr


def rasterize_region(
    region: RegionAnnotation, image_size: tuple[int, int], root: str | Path
) -> np.ndarray:
    """Boolean (H, W) mask of the annotated region, clipped to the image."""
    h, w = image_size
    if region.kind == "bbox":
        box: Box = region.payload
        mask = np.zeros((h, w), dtype=bool)
        r0, c0 = max(box.row0, 0), max(box.col0, 0)
        r1, c1 = min(box.row1, h - 1), min(box.col1, w - 1)
        if r0 <= r1 and c0 <= c1:
            mask[r0 : r1 + 1, c0 : c1 + 1] = True
        return mask
    if region.kind == "polygon":
        vertices = list(region.payload)
        if len(vertices) < 3:
            raise ValidationError(f"polygon needs at least 3 vertices, got {len(vertices)}")
        canvas = Image.new("L", (w, h), 0)
        ImageDraw.Draw(canvas).polygon([(c, r) for r, c in vertices], fill=1)
        return np.asarray(canvas, dtype=bool)
    mask_arr = load_image_array(Path(root) / str(region.payload))
    if mask_arr.shape[:2] != (h, w):
        raise ValidationError(
            f"mask size {mask_arr.shape[:2]} differs from image size {(h, w)}"
        )
    return mask_arr.max(axis=2) > 0


def best_fit_bbox(
    region: RegionAnnotation,
    image_size: tuple[int, int] | None = None,
    root: str | Path = ".",
) -> Box:
    """Tightest axis-aligned box containing every annotated pixel.

    A ``bbox`` annotation is returned unchanged. Mask and polygon
    annotations require ``image_size`` for rasterization.
    """
    if region.kind == "bbox":
        return region.payload
    if image_size is None:
        raise ValidationError(f"{region.kind} annotation needs the image size")
    mask = rasterize_region(region, image_size, root)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValidationError("empty annotation: no pixels set")
    return Box(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


def _valid_positions(allowed: np.ndarray, box_h: int, box_w: int) -> np.ndarray:
    """(k, 2) array of top-left positions whose full box lies in ``allowed``.

    Uses a summed-area table so each position is an O(1) interior test.
    """
    h, w = allowed.shape
    if box_h > h or box_w > w:
        return np.empty((0, 2), dtype=np.int64)
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    sat[1:, 1:] = np.cumsum(np.cumsum(allowed.astype(np.int64), axis=0), axis=1)
    full = (
        sat[box_h:, box_w:]
        - sat[: h - box_h + 1, box_w:]
        - sat[box_h:, : w - box_w + 1]
        + sat[: h - box_h + 1, : w - box_w + 1]
    )
    return np.argwhere(full == box_h * box_w)


def _foreground_mask(
    record: ImageRecord, image_size: tuple[int, int], root: str | Path
) -> np.ndarray:
    if record.foreground_region is None:
        return np.ones(image_size, dtype=bool)
    return rasterize_region(record.foreground_region, image_size, root)


def _defect_boxes(
    record: ImageRecord, image_size: tuple[int, int], root: str | Path
) -> list[Box]:
    return [best_fit_bbox(r, image_size, root) for r in record.defect_regions]


def paired_fg_crop(
    record: ImageRecord,
    defect_bbox: Box,
    seed: int,
    image_size: tuple[int, int],
    root: str | Path = ".",
    defect_boxes: list[Box] | None = None,
) -> tuple[Box, tuple[str, ...]]:
    """Same-size companion box inside the foreground, avoiding all defects.

    Deterministic for a fixed seed. Returns the box and any placement
    flags (``relaxed-overlap`` when the zero-overlap phase failed).
    """
    fg = _foreground_mask(record, image_size, root)
    box_h, box_w = defect_bbox.height, defect_bbox.width
    positions = _valid_positions(fg, box_h, box_w)
    if positions.shape[0] == 0:
        raise ValidationError(
            f"no anomaly-free placement: foreground admits no {box_h}x{box_w} box"
        )
    if defect_boxes is None:
        defect_boxes = _defect_boxes(record, image_size, root)

    rng = np.random.default_rng(seed)
    for attempt in range(MAX_STRICT_ATTEMPTS + MAX_RELAXED_ATTEMPTS):
        r0, c0 = positions[int(rng.integers(positions.shape[0]))]
        candidate = Box(int(r0), int(c0), int(r0) + box_h - 1, int(c0) + box_w - 1)
        ious = [candidate.iou(d) for d in defect_boxes]
        if all(v == 0.0 for v in ious):
            return candidate, ()
        if attempt >= MAX_STRICT_ATTEMPTS and all(v <= RELAXED_IOU for v in ious):
            return candidate, (FLAG_RELAXED_OVERLAP,)
    raise ValidationError(
        "no anomaly-free placement: overlap-free sampling exhausted "
        f"({MAX_STRICT_ATTEMPTS} strict + {MAX_RELAXED_ATTEMPTS} relaxed attempts)"
    )


def paired_bg_crop(
    record: ImageRecord,
    defect_bbox: Box,
    seed: int,
    image_size: tuple[int, int],
    root: str | Path = ".",
) -> Box:
    """Same-size box fully outside the foreground. Deterministic per seed."""
    fg = _foreground_mask(record, image_size, root)
    background = ~fg
    if not background.any():
        raise ValidationError("no background available: foreground covers the whole image")
    positions = _valid_positions(background, defect_bbox.height, defect_bbox.width)
    if positions.shape[0] == 0:
        raise ValidationError(
            f"no background available: background admits no "
            f"{defect_bbox.height}x{defect_bbox.width} box"
        )
    rng = np.random.default_rng(seed)
    r0, c0 = positions[int(rng.integers(positions.shape[0]))]
    return Box(int(r0), int(c0), int(r0) + defect_bbox.height - 1, int(c0) + defect_bbox.width - 1)


def crop_patch(image: np.ndarray, box: Box) -> PixelPatch:
    """Extract ``box`` from an image; parts past the borders become black."""
    h, w = image.shape[:2]
    out = np.zeros((box.height, box.width, image.shape[2]), dtype=np.uint8)
    r0, c0 = max(box.row0, 0), max(box.col0, 0)
    r1, c1 = min(box.row1, h - 1), min(box.col1, w - 1)
    if r0 <= r1 and c0 <= c1:
        out[r0 - box.row0 : r1 - box.row0 + 1, c0 - box.col0 : c1 - box.col0 + 1] = image[
            r0 : r1 + 1, c0 : c1 + 1
        ]
    return PixelPatch(pixels=out, original_size=(box.height, box.width))


def normalize_patch(patch: PixelPatch, target: int) -> PixelPatch:
    """Aspect-preserving bilinear resize onto a target x target black canvas.

    The longer side is scaled to ``target`` and the shorter side rounded;
    the content is centered and the padding is exactly zero-valued.
    Already-normalized patches pass through bit-identically.
    """
    if target < 8:
        raise ValidationError(f"target size must be >= 8, got {target}")
    h, w = patch.size
    if h >= w:
        new_h = target
        new_w = max(1, int(round(w * target / h)))
    else:
        new_w = target
        new_h = max(1, int(round(h * target / w)))

    channels = patch.pixels.shape[2]
    mode = "L" if channels == 1 else "RGB"
    img = Image.fromarray(patch.pixels[:, :, 0] if channels == 1 else patch.pixels, mode=mode)
    resized = np.asarray(img.resize((new_w, new_h), Image.Resampling.BILINEAR), dtype=np.uint8)
    if channels == 1:
        resized = resized[:, :, None]

    canvas = np.zeros((target, target, channels), dtype=np.uint8)
    off_r = (target - new_h) // 2
    off_c = (target - new_w) // 2
    canvas[off_r : off_r + new_h, off_c : off_c + new_w] = resized
    return PixelPatch(pixels=canvas, original_size=patch.original_size)


def image_id_for(record: ImageRecord) -> str:
    stem = re.sub(r"\.[A-Za-z0-9]+$", "", record.image_path)
    return re.sub(r"[^A-Za-z0-9]+", "_", stem).strip("_")


def region_seed(base_seed: int, record_index: int, region_index: int, channel: int = 0) -> int:
    """Stable per-region seed, independent of processing order."""
    ss = np.random.SeedSequence([int(base_seed), record_index, region_index, channel])
    return int(ss.generate_state(1)[0])


@dataclass
class CropSetResult:
    pairs: list[CropPair]
    skips: list[SkipEntry]


def build_crop_sets(manifest: AnnotationManifest, target: int, seed: int) -> CropSetResult:
    """One normalized CropPair per defect region instance.

    Placement failures are collected as skip entries; the build fails only
    when nothing could be produced at all.
    """
    root = Path(manifest.root)
    pairs: list[CropPair] = []
    skips: list[SkipEntry] = []
    for rec_idx, record in enumerate(manifest.records):
        if not record.defect_regions:
            continue
        image = load_image_array(root / record.image_path)
        image_size = (image.shape[0], image.shape[1])
        image_id = image_id_for(record)
        defect_boxes = _defect_boxes(record, image_size, root)
        class_counters: dict[str, int] = {}
        for reg_idx, region in enumerate(record.defect_regions):
            anomaly_class = region.anomaly_class or "unknown"
            index = class_counters.get(anomaly_class, 0)
            class_counters[anomaly_class] = index + 1
            defect_box = defect_boxes[reg_idx]
            seed_used = region_seed(seed, rec_idx, reg_idx)
            try:
                fg_box, flags = paired_fg_crop(
                    record, defect_box, seed_used, image_size, root, defect_boxes
                )
            except ValidationError as exc:
                skips.append(SkipEntry(record.image_path, reg_idx, str(exc)))
                continue

            background_crop = None
            bg_box = None
            try:
                bg_box = paired_bg_crop(
                    record, defect_box, region_seed(seed, rec_idx, reg_idx, channel=1),
                    image_size, root,
                )
                background_crop = normalize_patch(crop_patch(image, bg_box), target)
            except ValidationError:
                flags = flags + (FLAG_NO_BACKGROUND,)

            pairs.append(
                CropPair(
                    defect_crop=normalize_patch(crop_patch(image, defect_box), target),
                    normal_fg_crop=normalize_patch(crop_patch(image, fg_box), target),
                    background_crop=background_crop,
                    source_image_id=image_id,
                    anomaly_class=anomaly_class,
                    object_type=record.object_type,
                    box_size=(defect_box.height, defect_box.width),
                    seed_used=seed_used,
                    index=index,
                    flags=flags,
                    defect_box=defect_box,
                    normal_fg_box=fg_box,
                    background_box=bg_box,
                )
            )
    if not pairs:
        detail = "; ".join(f"{s.image_path}#{s.region_index}: {s.reason}" for s in skips[:5])
        raise ValidationError(f"no crop pairs could be produced ({detail or 'no defect regions'})")
    return CropSetResult(pairs=pairs, skips=skips)


def _save_patch_png(patch: PixelPatch, path: Path) -> None:
    channels = patch.pixels.shape[2]
    mode = "L" if channels == 1 else "RGB"
    img = Image.fromarray(patch.pixels[:, :, 0] if channels == 1 else patch.pixels, mode=mode)
    img.save(path, format="PNG")


def save_crop_set(
    result: CropSetResult,
    out_dir: str | Path,
    manifest: AnnotationManifest,
    target: int,
    seed: int,
) -> Path:
    """Write one PNG per crop plus the ``pairs.json`` index. Returns the index path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for pair in result.pairs:
        base = f"{pair.source_image_id}_{pair.anomaly_class}_{pair.index}"
        defect_name = f"{base}_defect.png"
        fg_name = f"{base}_fg.png"
        _save_patch_png(pair.defect_crop, out_dir / defect_name)
        _save_patch_png(pair.normal_fg_crop, out_dir / fg_name)
        bg_name = None
        if pair.background_crop is not None:
            bg_name = f"{base}_bg.png"
            _save_patch_png(pair.background_crop, out_dir / bg_name)
        def _box_list(box):
            return None if box is None else [box.row0, box.col0, box.row1, box.col1]

        entries.append(
            {
                "sample_id": pair.sample_id,
                "image_id": pair.source_image_id,
                "anomaly_class": pair.anomaly_class,
                "object_type": pair.object_type,
                "index": pair.index,
                "box_height": pair.box_size[0],
                "box_width": pair.box_size[1],
                "seed_used": pair.seed_used,
                "defect_png": defect_name,
                "fg_png": fg_name,
                "bg_png": bg_name,
                "defect_box": _box_list(pair.defect_box),
                "fg_box": _box_list(pair.normal_fg_box),
                "bg_box": _box_list(pair.background_box),
                "flags": list(pair.flags),
            }
        )
    index = {
        "dataset_name": manifest.dataset_name,
        "target_size": target,
        "seed": seed,
        "pairs": entries,
        "skips": [
            {"image_path": s.image_path, "region_index": s.region_index, "reason": s.reason}
            for s in result.skips
        ],
    }
    index_path = out_dir / "pairs.json"
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index_path


def load_pairs_index(path: str | Path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputOutputError(f"pairs index not found: {path}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})")
    if not isinstance(data, dict) or "pairs" not in data:
        raise ValidationError(f"{path}: not a pairs index")
    return data
