"""Domain types for the crop preparation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VALID_REGION_KINDS = ("mask_path", "bbox", "polygon")
CROP_KINDS = ("defect", "fg", "bg")


@dataclass(frozen=True)
class Box:
    """Axis-aligned pixel rectangle with inclusive integer bounds."""

    row0: int
    col0: int
    row1: int
    col1: int

    @property
    def height(self) -> int:
        return self.row1 - self.row0 + 1

    @property
    def width(self) -> int:
        return self.col1 - self.col0 + 1

    @property
    def area(self) -> int:
        return self.height * self.width

    def intersection_area(self, other: "Box") -> int:
        dh = min(self.row1, other.row1) - max(self.row0, other.row0) + 1
        dw = min(self.col1, other.col1) - max(self.col0, other.col0) + 1
        if dh <= 0 or dw <= 0:
            return 0
        return dh * dw

    def iou(self, other: "Box") -> float:
        inter = self.intersection_area(other)
        if inter == 0:
            return 0.0
        return inter / float(self.area + other.area - inter)


@dataclass(frozen=True)
class RegionAnnotation:
    """A single annotated region.

    ``payload`` depends on ``kind``: a :class:`Box` for ``bbox``, a path
    string relative to the manifest root for ``mask_path``, or a tuple of
    (row, col) vertices for ``polygon``.
    """

    kind: str
    payload: object
    anomaly_class: str | None = None


@dataclass(frozen=True)
class ImageRecord:
    image_path: str
    object_type: str
    defect_regions: tuple[RegionAnnotation, ...] = ()
    foreground_region: RegionAnnotation | None = None


@dataclass(frozen=True)
class AnnotationManifest:
    dataset_name: str
    schema_version: str
    root: str
    anomaly_classes: tuple[str, ...]
    records: tuple[ImageRecord, ...]


@dataclass
class PixelPatch:
    """A crop of 8-bit pixels, shape (H, W, C) with C in {1, 3}.

    ``original_size`` preserves the pre-normalization content size so that
    normalization is idempotent and auditable.
    """

    pixels: np.ndarray
    original_size: tuple[int, int]

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3:
            raise ValueError("PixelPatch.pixels must have shape (H, W, C)")
        if self.pixels.dtype != np.uint8:
            raise ValueError("PixelPatch.pixels must be uint8")

    @property
    def size(self) -> tuple[int, int]:
        return (int(self.pixels.shape[0]), int(self.pixels.shape[1]))

    def equals(self, other: "PixelPatch") -> bool:
        return (
            self.original_size == other.original_size
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )


@dataclass
class CropPair:
    """A defect crop with its same-image, same-size companions.

    The source boxes are kept for auditability: they let the placement
    invariants (identical sizes, zero defect overlap) be re-checked after
    the fact.
    """

    defect_crop: PixelPatch
    normal_fg_crop: PixelPatch
    background_crop: PixelPatch | None
    source_image_id: str
    anomaly_class: str
    object_type: str
    box_size: tuple[int, int]
    seed_used: int
    index: int = 0
    flags: tuple[str, ...] = field(default=())
    defect_box: Box | None = None
    normal_fg_box: Box | None = None
    background_box: Box | None = None

    @property
    def sample_id(self) -> str:
        return f"{self.source_image_id}_{self.anomaly_class}_{self.index}"


@dataclass(frozen=True)
class SkipEntry:
    """One placement failure recorded while building a crop set."""

    image_path: str
    region_index: int
    reason: str
