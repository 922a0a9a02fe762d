import numpy as np
import pytest

from repgap.errors import InputOutputError, ValidationError
from repgap.featstore import (
    BackboneMeta,
    FeatureMatrix,
    pair_matrices,
    read_features,
    subset_by_ids,
    write_features,
)


def matrix(values, ids=None, **meta):
    values = np.asarray(values, dtype=np.float32)
    if ids is None:
        ids = tuple(f"s{i}" for i in range(values.shape[0]))
    return FeatureMatrix(values=values, sample_ids=ids, meta=BackboneMeta(**meta))


def test_file_size_is_exactly_header_plus_payload(tmp_path):
    path = tmp_path / "m.fgap"
    write_features(matrix(np.arange(6).reshape(2, 3)), path)
    assert path.stat().st_size == 8 + 4 + 4 + 6 * 4


def test_nan_rejected_before_write(tmp_path):
    path = tmp_path / "m.fgap"
    bad = np.ones((2, 2), dtype=np.float32)
    bad[0, 1] = np.nan
    with pytest.raises(ValidationError, match="non-finite"):
        write_features(matrix(bad), path)
    assert not path.exists()


def test_roundtrip_preserves_everything(tmp_path):
    path = tmp_path / "m.fgap"
    original = matrix(
        np.random.default_rng(0).normal(size=(4, 8)),
        backbone_name="net",
        pretrain_dataset="set-a",
        dataset="tiny",
        object_type="plate",
        anomaly_class="scuff",
        kind="defect",
        layer_tag="pool",
    )
    write_features(original, path)
    again = read_features(path)
    assert again.n == 4 and again.p == 8
    assert np.array_equal(again.values, original.values)
    assert again.sample_ids == original.sample_ids
    assert again.meta == original.meta
    # a second write produces identical bytes
    write_features(again, tmp_path / "m2.fgap")
    assert (tmp_path / "m2.fgap").read_bytes() == path.read_bytes()


def test_bad_magic(tmp_path):
    path = tmp_path / "m.fgap"
    path.write_bytes(b"XXXXXXXX" + b"\x00" * 16)
    with pytest.raises(InputOutputError, match="not an FGAP file"):
        read_features(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "m.fgap"
    write_features(matrix(np.ones((2, 3))), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(InputOutputError, match="expected 40 bytes"):
        read_features(path)


def test_missing_sidecar_warns(tmp_path):
    path = tmp_path / "m.fgap"
    write_features(matrix(np.ones((2, 3))), path)
    (tmp_path / "m.fgap.meta.json").unlink()
    with pytest.warns(UserWarning, match="missing sidecar"):
        again = read_features(path)
    assert again.meta.backbone_name == ""
    assert len(again.sample_ids) == 2


def test_duplicate_ids_rejected():
    with pytest.raises(ValidationError, match="duplicate sample id"):
        matrix(np.ones((2, 2)), ids=("a", "a"))


def test_pairing_and_errors():
    defect = matrix(np.random.default_rng(1).normal(size=(5, 16)))
    normal = matrix(np.random.default_rng(2).normal(size=(5, 16)))
    paired = pair_matrices(defect, normal)
    assert paired.n == 5 and paired.p == 16

    with pytest.raises(ValidationError, match="feature length mismatch"):
        pair_matrices(defect, matrix(np.ones((5, 32))))
    with pytest.raises(ValidationError, match="sample count mismatch"):
        pair_matrices(defect, matrix(np.ones((4, 16)), ids=("s0", "s1", "s2", "s3")))
    renamed = matrix(normal.values, ids=("s0", "s1", "s2", "s3", "zz"))
    with pytest.raises(ValidationError, match="s4"):
        pair_matrices(defect, renamed)


def test_pairing_realigns_shuffled_rows():
    rng = np.random.default_rng(3)
    defect = matrix(rng.normal(size=(6, 4)))
    values = rng.normal(size=(6, 4)).astype(np.float32)
    normal = matrix(values)
    perm = [3, 1, 5, 0, 2, 4]
    shuffled = matrix(values[perm], ids=tuple(f"s{i}" for i in perm))
    direct = pair_matrices(defect, normal)
    realigned = pair_matrices(defect, shuffled)
    assert np.array_equal(direct.companion.values, realigned.companion.values)
    assert direct.companion.sample_ids == realigned.companion.sample_ids


def test_subset_by_ids():
    m = matrix(np.arange(12).reshape(4, 3))
    sub = subset_by_ids(m, ["s2", "s0"])
    assert sub.sample_ids == ("s2", "s0")
    assert np.array_equal(sub.values[0], m.values[2])
    with pytest.raises(ValidationError, match="not present"):
        subset_by_ids(m, ["nope"])
