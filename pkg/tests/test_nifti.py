import numpy as np
import pytest

from shoulderct.errors import FormatError
from shoulderct.nifti import read_labelmap, read_volume, write_labelmap, write_volume
from shoulderct.volume import LabelMap, Volume


def test_volume_round_trip_bitwise(tmp_path):
    data = np.random.rand(5, 6, 7).astype(np.float32)
    vol = Volume(data=data, spacing=(0.5, 0.7, 1.2), origin=(-3.0, 4.0, 9.5), laterality="left")
    path = tmp_path / "case.nii"
    write_volume(vol, path)
    back = read_volume(path)
    assert np.array_equal(back.data, data)
    assert back.spacing == pytest.approx(vol.spacing)
    assert back.origin == pytest.approx(vol.origin)
    assert back.laterality == "left"


def test_gzip_round_trip(tmp_path):
    data = np.random.rand(4, 4, 4).astype(np.float32)
    vol = Volume(data=data, laterality="right")
    path = tmp_path / "case.nii.gz"
    write_volume(vol, path)
    back = read_volume(path)
    assert np.array_equal(back.data, data)
    assert back.laterality == "right"


def test_fine_spacing_preserved(tmp_path):
    vol = Volume(data=np.zeros((2, 2, 2), dtype=np.float32), spacing=(0.30, 0.30, 0.30))
    path = tmp_path / "fine.nii"
    write_volume(vol, path)
    assert read_volume(path).spacing == pytest.approx((0.30, 0.30, 0.30), abs=1e-6)


def test_single_voxel_round_trip(tmp_path):
    vol = Volume(data=np.array([[[42.0]]], dtype=np.float32))
    path = tmp_path / "one.nii"
    write_volume(vol, path)
    assert read_volume(path).data[0, 0, 0] == 42.0


def test_labelmap_round_trip(tmp_path):
    data = np.random.randint(0, 3, size=(6, 5, 4)).astype(np.uint8)
    lab = LabelMap(data=data, spacing=(1, 1, 2), laterality="left")
    path = tmp_path / "lab.nii"
    write_labelmap(lab, path)
    back = read_labelmap(path)
    assert np.array_equal(back.data, data)
    assert back.laterality == "left"


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.nii"
    path.write_bytes(b"\x00" * 400)
    with pytest.raises(FormatError):
        read_volume(path)


def test_truncated_file_rejected(tmp_path):
    vol = Volume(data=np.random.rand(4, 4, 4).astype(np.float32))
    path = tmp_path / "trunc.nii"
    write_volume(vol, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 40])
    with pytest.raises(FormatError):
        read_volume(path)


def test_missing_sidecar_falls_back_to_unknown(tmp_path):
    vol = Volume(data=np.zeros((2, 2, 2), dtype=np.float32), laterality="left")
    path = tmp_path / "case.nii"
    write_volume(vol, path)
    (tmp_path / "case.json").unlink()
    assert read_volume(path).laterality == "unknown"
