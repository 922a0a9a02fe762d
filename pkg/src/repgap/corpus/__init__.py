"""Corpus preparation: manifests, adapters and paired crop extraction."""

from repgap.corpus.crops import (
    CropSetResult,
    best_fit_bbox,
    build_crop_sets,
    crop_patch,
    load_pairs_index,
    normalize_patch,
    paired_bg_crop,
    paired_fg_crop,
    rasterize_region,
    save_crop_set,
)
from repgap.corpus.manifest import load_manifest, save_manifest
from repgap.corpus.mvtec import adapt_mvtec
from repgap.corpus.types import (
    AnnotationManifest,
    Box,
    CropPair,
    ImageRecord,
    PixelPatch,
    RegionAnnotation,
    SkipEntry,
)

__all__ = [
    "AnnotationManifest",
    "Box",
    "CropPair",
    "CropSetResult",
    "ImageRecord",
    "PixelPatch",
    "RegionAnnotation",
    "SkipEntry",
    "adapt_mvtec",
    "best_fit_bbox",
    "build_crop_sets",
    "crop_patch",
    "load_manifest",
    "load_pairs_index",
    "normalize_patch",
    "paired_bg_crop",
    "paired_fg_crop",
    "rasterize_region",
    "save_crop_set",
    "save_manifest",
]
