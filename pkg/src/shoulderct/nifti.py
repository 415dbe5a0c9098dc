"""Single-file NIfTI-1 volume container.

Minimal reader/writer covering what the pipeline needs: a magic-validated
header, voxel spacing via ``pixdim``, origin/orientation via the sform, and
raw Fortran-ordered payload at ``vox_offset``.  ``.nii`` and gzipped
``.nii.gz`` are both supported.  Laterality travels in a sidecar JSON next to
the volume (``<name>.json``) because NIfTI-1 has no standard field for it.

Axis convention matches :mod:`shoulderct.volume`: the array is indexed
``(x, y, z)`` and the sform is a diagonal spacing matrix plus the origin, so
axis 0 is the sagittal (left/right) axis.
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .volume import LabelMap, Volume

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC = b"n+1\x00"

# NIfTI datatype codes
_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


def _sidecar(path: Path) -> Path:
    name = path.name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)] + ".json")
    return path.with_suffix(".json")


def _pack_header(shape, spacing, origin, dtype: np.dtype) -> bytes:
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, shape[0], shape[1], shape[2], 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, _CODES[np.dtype(dtype)])
    struct.pack_into("<h", hdr, 72, np.dtype(dtype).itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, spacing[0], spacing[1], spacing[2], 0, 0, 0, 0)
    struct.pack_into("<f", hdr, 108, float(VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope / scl_inter
    struct.pack_into("<b", hdr, 123, 2)          # xyzt_units: millimeters
    struct.pack_into("<2h", hdr, 252, 0, 1)      # qform unused, sform scaled-affine
    struct.pack_into("<4f", hdr, 280, spacing[0], 0, 0, origin[0])
    struct.pack_into("<4f", hdr, 296, 0, spacing[1], 0, origin[1])
    struct.pack_into("<4f", hdr, 312, 0, 0, spacing[2], origin[2])
    hdr[344:348] = MAGIC
    return bytes(hdr)


def _open(path: Path, mode: str):
    if path.name.endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def _write(path: Path, arr: np.ndarray, spacing, origin, laterality: str) -> None:
    path = Path(path)
    dtype = np.dtype(arr.dtype)
    if dtype not in _CODES:
        raise FormatError(f"unsupported dtype {dtype}")
    header = _pack_header(arr.shape, spacing, origin, dtype)
    with _open(path, "wb") as fh:
        fh.write(header)
        fh.write(b"\x00" * (VOX_OFFSET - HEADER_SIZE))
        fh.write(np.asfortranarray(arr).tobytes(order="F"))
    _sidecar(path).write_text(json.dumps({"laterality": laterality}) + "\n")


def _read(path: Path) -> tuple[np.ndarray, tuple, tuple, str]:
    path = Path(path)
    with _open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[344:348] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[344:348]!r}")
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != HEADER_SIZE:
        raise FormatError(f"{path}: sizeof_hdr={sizeof_hdr}")
    dim = struct.unpack_from("<8h", raw, 40)
    if dim[0] != 3:
        raise FormatError(f"{path}: expected 3D volume, ndim={dim[0]}")
    shape = tuple(int(d) for d in dim[1:4])
    (datatype,) = struct.unpack_from("<h", raw, 70)
    if datatype not in _DTYPES:
        raise FormatError(f"{path}: unsupported datatype code {datatype}")
    pixdim = struct.unpack_from("<8f", raw, 76)
    spacing = tuple(float(p) for p in pixdim[1:4])
    if any(s <= 0 for s in spacing):
        raise FormatError(f"{path}: non-positive spacing {spacing}")
    (vox_offset,) = struct.unpack_from("<f", raw, 108)
    srow_x = struct.unpack_from("<4f", raw, 280)
    srow_y = struct.unpack_from("<4f", raw, 296)
    srow_z = struct.unpack_from("<4f", raw, 312)
    origin = (float(srow_x[3]), float(srow_y[3]), float(srow_z[3]))
    dtype = np.dtype(_DTYPES[datatype])
    count = int(np.prod(shape))
    start = int(vox_offset)
    end = start + count * dtype.itemsize
    if len(raw) < end:
        raise FormatError(f"{path}: payload truncated ({len(raw)} < {end} bytes)")
    arr = np.frombuffer(raw[start:end], dtype=dtype).reshape(shape, order="F").copy()

    laterality = "unknown"
    sidecar = _sidecar(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        laterality = meta.get("laterality", "unknown")
    return arr, spacing, origin, laterality


def write_volume(vol: Volume, path: str | Path) -> None:
    _write(Path(path), vol.data, vol.spacing, vol.origin, vol.laterality)


def read_volume(path: str | Path) -> Volume:
    arr, spacing, origin, laterality = _read(Path(path))
    return Volume(data=arr, spacing=spacing, origin=origin, laterality=laterality)


def write_labelmap(lab: LabelMap, path: str | Path) -> None:
    data = lab.data
    if data.dtype not in (np.uint8, np.int16, np.int32):
        data = data.astype(np.uint8)
    _write(Path(path), data, lab.spacing, lab.origin, lab.laterality)


def read_labelmap(path: str | Path) -> LabelMap:
    arr, spacing, origin, laterality = _read(Path(path))
    if not np.issubdtype(arr.dtype, np.integer):
        raise FormatError(f"{path}: label payload must be integer, got {arr.dtype}")
    return LabelMap(data=arr, spacing=spacing, origin=origin, laterality=laterality)
