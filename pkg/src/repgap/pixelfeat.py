"""Deterministic pixel-statistics featurizer.

Gives the pipeline a self-contained way to turn crops into FGAP matrices
without any learned backbone: each crop becomes the grid of luma means
over a fixed partition of the image plane. Real backbones live behind the
separate extractor front end and write the same file format.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from repgap.corpus.crops import load_image_array
from repgap.errors import ValidationError
from repgap.featstore import BackboneMeta, FeatureMatrix
from repgap.metrics.rmi import to_luma

DEFAULT_GRID = 16

_KIND_TO_FILE_FIELD = {
    "defect": "defect_png",
    "normal_fg": "fg_png",
    "background": "bg_png",
}


def luma_grid_vector(pixels: np.ndarray, grid: int = DEFAULT_GRID) -> np.ndarray:
    """Flattened grid of luma cell means, float32, length grid*grid."""
    luma = to_luma(pixels)
    h, w = luma.shape
    if h < grid or w < grid:
        raise ValidationError(f"crop {h}x{w} smaller than feature grid {grid}")
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = luma.cumsum(axis=0).cumsum(axis=1)
    r_edges = (np.arange(grid + 1) * h) // grid
    c_edges = (np.arange(grid + 1) * w) // grid
    corners = sat[np.ix_(r_edges, c_edges)]
    sums = corners[1:, 1:] - corners[:-1, 1:] - corners[1:, :-1] + corners[:-1, :-1]
    areas = np.outer(np.diff(r_edges), np.diff(c_edges))
    return (sums / areas).astype(np.float32).ravel()


def extract_pixel_features(
    entries: list[dict],
    crops_dir: str | Path,
    kind: str,
    meta: BackboneMeta | None = None,
    grid: int = DEFAULT_GRID,
) -> FeatureMatrix:
    """Featurize the crops of one kind listed in a pairs index.

    Entries without the requested crop (a pair can lack a background) are
    skipped; the returned sample ids identify which rows survived.
    """
    if kind not in _KIND_TO_FILE_FIELD:
        raise ValidationError(f"kind must be one of {sorted(_KIND_TO_FILE_FIELD)}, got {kind!r}")
    crops_dir = Path(crops_dir)
    file_field = _KIND_TO_FILE_FIELD[kind]
    rows = []
    ids = []
    for entry in entries:
        name = entry.get(file_field)
        if name is None:
            continue
        rows.append(luma_grid_vector(load_image_array(crops_dir / name), grid))
        ids.append(entry["sample_id"])
    if not rows:
        raise ValidationError(f"no crops of kind {kind!r} in the pairs index")
    if meta is None:
        meta = BackboneMeta(kind=kind)
    base = meta
    meta = BackboneMeta(
        backbone_name=base.backbone_name or f"luma-grid{grid}",
        pretrain_dataset=base.pretrain_dataset or "none",
        dataset=base.dataset,
        object_type=base.object_type,
        anomaly_class=base.anomaly_class,
        kind=kind,
        layer_tag=base.layer_tag or f"meanpool-{grid}x{grid}",
    )
    return FeatureMatrix(values=np.stack(rows), sample_ids=tuple(ids), meta=meta)
