"""FGAP: the binary feature-matrix interchange format.

Layout: bytes 0-7 are the ASCII magic ``FGAPv001``, bytes 8-11 the sample
count n (unsigned 32-bit little-endian), bytes 12-15 the feature length p,
followed by n*p IEEE-754 float32 values, little-endian, row-major. A JSON
sidecar ``<file>.meta.json`` carries the backbone metadata and per-row
sample ids. Files are written atomically via a temp-file rename.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from repgap.errors import InputOutputError, ValidationError

MAGIC = b"FGAPv001"
HEADER = struct.Struct("<8sII")

KIND_DEFECT = "defect"
KIND_NORMAL_FG = "normal_fg"
KIND_BACKGROUND = "background"
VALID_KINDS = (KIND_DEFECT, KIND_NORMAL_FG, KIND_BACKGROUND)


@dataclass(frozen=True)
class BackboneMeta:
    backbone_name: str = ""
    pretrain_dataset: str = ""
    dataset: str = ""
    object_type: str = ""
    anomaly_class: str = ""
    kind: str = KIND_DEFECT
    layer_tag: str = ""

    def __post_init__(self) -> None:
        if self.kind not in VALID_KINDS:
            raise ValidationError(f"kind must be one of {VALID_KINDS}, got {self.kind!r}")


@dataclass
class FeatureMatrix:
    """n x p float32 embedding matrix with provenance and row ids."""

    values: np.ndarray
    sample_ids: tuple[str, ...]
    meta: BackboneMeta = field(default_factory=BackboneMeta)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        self.sample_ids = tuple(self.sample_ids)
        validate_matrix(self)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def p(self) -> int:
        return int(self.values.shape[1])


def validate_matrix(matrix: FeatureMatrix) -> None:
    values = matrix.values
    if values.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {values.shape}")
    n, p = values.shape
    if n < 1 or p < 1:
        raise ValidationError(f"feature matrix must be at least 1x1, got {n}x{p}")
    if not np.isfinite(values).all():
        bad = int(np.flatnonzero(~np.isfinite(values).ravel())[0])
        raise ValidationError(f"non-finite value at flat index {bad}")
    if len(matrix.sample_ids) != n:
        raise ValidationError(
            f"sample_ids length {len(matrix.sample_ids)} does not match n={n}"
        )
    if len(set(matrix.sample_ids)) != n:
        seen: set[str] = set()
        dup = next(s for s in matrix.sample_ids if s in seen or seen.add(s))
        raise ValidationError(f"duplicate sample id {dup!r}")


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_features(matrix: FeatureMatrix, path: str | Path) -> None:
    """Write the matrix in FGAP format plus its JSON sidecar."""
    validate_matrix(matrix)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = HEADER.pack(MAGIC, matrix.n, matrix.p) + matrix.values.astype("<f4").tobytes(order="C")
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(payload)
        os.replace(tmp, path)
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}")
    sidecar = {
        **dataclasses.asdict(matrix.meta),
        "sample_ids": list(matrix.sample_ids),
    }
    sc_tmp = _sidecar_path(path).with_name(_sidecar_path(path).name + ".tmp")
    sc_tmp.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(sc_tmp, _sidecar_path(path))


def read_features(path: str | Path) -> FeatureMatrix:
    """Read an FGAP file, re-validating all invariants."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise InputOutputError(f"feature file not found: {path}")
    if len(blob) < HEADER.size:
        raise InputOutputError(f"{path}: truncated header, {len(blob)} bytes")
    magic, n, p = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InputOutputError(f"{path}: not an FGAP file (magic {magic!r})")
    expected = HEADER.size + n * p * 4
    if len(blob) != expected:
        raise InputOutputError(f"{path}: expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f4", offset=HEADER.size).reshape(n, p).copy()

    meta = BackboneMeta()
    sample_ids: tuple[str, ...]
    sidecar = _sidecar_path(path)
    if sidecar.is_file():
        data = json.loads(sidecar.read_text(encoding="utf-8"))
        ids = data.pop("sample_ids", None)
        known = {f.name for f in dataclasses.fields(BackboneMeta)}
        meta = BackboneMeta(**{k: v for k, v in data.items() if k in known})
        if ids is None:
            sample_ids = tuple(f"row-{i}" for i in range(n))
        else:
            sample_ids = tuple(str(s) for s in ids)
    else:
        warnings.warn(f"missing sidecar for {path}; metadata left empty", stacklevel=2)
        sample_ids = tuple(f"row-{i}" for i in range(n))
    return FeatureMatrix(values=values, sample_ids=sample_ids, meta=meta)


@dataclass
class PairedFeatures:
    """Row-aligned view over a defect matrix and its companion matrix."""

    defect: FeatureMatrix
    companion: FeatureMatrix

    @property
    def n(self) -> int:
        return self.defect.n

    @property
    def p(self) -> int:
        return self.defect.p

    def rows(self):
        for k in range(self.n):
            yield self.defect.values[k], self.companion.values[k]


def pair_matrices(defect: FeatureMatrix, normal: FeatureMatrix) -> PairedFeatures:
    """Align a companion matrix to the defect row order by sample id."""
    if defect.p != normal.p:
        raise ValidationError(f"feature length mismatch: {defect.p} vs {normal.p}")
    if defect.n != normal.n:
        raise ValidationError(f"sample count mismatch: {defect.n} vs {normal.n}")
    index = {sid: i for i, sid in enumerate(normal.sample_ids)}
    order = []
    for sid in defect.sample_ids:
        if sid not in index:
            raise ValidationError(f"id misalignment: {sid!r} missing from companion matrix")
        order.append(index[sid])
    aligned = FeatureMatrix(
        values=normal.values[order],
        sample_ids=tuple(normal.sample_ids[i] for i in order),
        meta=normal.meta,
    )
    return PairedFeatures(defect=defect, companion=aligned)


def subset_by_ids(matrix: FeatureMatrix, ids: list[str] | tuple[str, ...]) -> FeatureMatrix:
    """Restrict a matrix to the given sample ids, in the given order."""
    index = {sid: i for i, sid in enumerate(matrix.sample_ids)}
    missing = [sid for sid in ids if sid not in index]
    if missing:
        raise ValidationError(f"ids not present in matrix: {missing[:3]}")
    order = [index[sid] for sid in ids]
    return FeatureMatrix(
        values=matrix.values[order],
        sample_ids=tuple(ids),
        meta=matrix.meta,
    )
