"""Volumetric data model and preprocessing.

Arrays are indexed ``(x, y, z)`` with axis 0 = left/right (sagittal), axis 1 =
anterior/posterior, axis 2 = inferior/superior.  World coordinates are
millimeters: ``world = origin + index * spacing``.  Volumes and label maps are
treated as immutable after construction so they can be shared freely across
worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CoverageGap,
    EmptyForeground,
    InvalidIntensity,
    OrientationUnknown,
    ShapeError,
)

HU_MIN = -1024.0   # air
HU_MAX = 2500.0    # dense cortical bone
HU_RANGE = HU_MAX - HU_MIN

BACKGROUND, HUMERUS, SCAPULA = 0, 1, 2
CLASS_IDS = (BACKGROUND, HUMERUS, SCAPULA)

LATERALITIES = ("left", "right", "unknown")
_FLIP_SIDE = {"left": "right", "right": "left", "unknown": "unknown"}


@dataclass(frozen=True)
class Volume:
    """3D scalar grid (HU or normalized intensities) with voxel geometry."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    laterality: str = "unknown"
    sagittal_axis: int | None = 0

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeError(f"volume must be 3D, got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ShapeError(f"degenerate volume shape {self.data.shape}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.laterality not in LATERALITIES:
            raise ValueError(f"laterality must be one of {LATERALITIES}")
        self.data.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def world(self, index: Sequence[float]) -> np.ndarray:
        """World position (mm) of a voxel index."""
        return np.asarray(self.origin) + np.asarray(index) * np.asarray(self.spacing)

    def with_data(self, data: np.ndarray) -> "Volume":
        return replace(self, data=data)


@dataclass(frozen=True)
class LabelMap:
    """3D integer grid over {0: background, 1: humerus, 2: scapula}.

    Shares voxel geometry with its paired :class:`Volume`.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    laterality: str = "unknown"
    sagittal_axis: int | None = 0

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ShapeError(f"label map must be 3D, got shape {self.data.shape}")
        if not np.issubdtype(self.data.dtype, np.integer):
            raise ShapeError(f"label map must be integer, got {self.data.dtype}")
        lo, hi = int(self.data.min()), int(self.data.max())
        if lo < BACKGROUND or hi > SCAPULA:
            raise ValueError(f"label ids outside {CLASS_IDS}: [{lo}, {hi}]")
        self.data.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def world(self, index: Sequence[float]) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(index) * np.asarray(self.spacing)

    def mask(self, class_id: int) -> np.ndarray:
        return self.data == class_id

    def with_data(self, data: np.ndarray) -> "LabelMap":
        return replace(self, data=data)


@dataclass(frozen=True)
class StagingLabels:
    """Per-task ground-truth grades: osteophytes 0-2, joint space 0-2, alignment 0-1."""

    os: int
    js: int
    hsa: int

    TASK_CLASSES = {"os": 3, "js": 3, "hsa": 2}

    def __post_init__(self):
        for task, count in self.TASK_CLASSES.items():
            value = getattr(self, task)
            if not 0 <= value < count:
                raise ValueError(f"{task} grade {value} outside [0, {count})")

    def as_dict(self) -> dict[str, int]:
        return {"os": self.os, "js": self.js, "hsa": self.hsa}


# ---------------------------------------------------------------------------
# intensity normalization
# ---------------------------------------------------------------------------

def normalize_hu(vol: Volume) -> Volume:
    """Clip HU to [-1024, 2500] and rescale linearly to [0, 1]."""
    if not np.isfinite(vol.data).all():
        raise InvalidIntensity("volume contains non-finite intensities")
    out = (np.clip(vol.data.astype(np.float64), HU_MIN, HU_MAX) - HU_MIN) / HU_RANGE
    return vol.with_data(out.astype(np.float32))


# ---------------------------------------------------------------------------
# foreground cropping
# ---------------------------------------------------------------------------

def foreground_bounding_box(lab: LabelMap, margin: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Tight inclusive-exclusive box around non-background voxels, expanded
    by ``margin`` voxels and clamped to the array bounds."""
    fg = lab.data != BACKGROUND
    if not fg.any():
        raise EmptyForeground("label map has no foreground voxels")
    lo = np.empty(3, dtype=int)
    hi = np.empty(3, dtype=int)
    for axis in range(3):
        proj = fg.any(axis=tuple(a for a in range(3) if a != axis))
        idx = np.flatnonzero(proj)
        lo[axis] = max(0, idx[0] - margin)
        hi[axis] = min(lab.shape[axis], idx[-1] + 1 + margin)
    return lo, hi


def crop_to_foreground(vol: Volume, lab: LabelMap, margin: int = 8) -> tuple[Volume, LabelMap]:
    """Crop volume and labels to the foreground box, preserving world coordinates.

    The origin is shifted so every retained voxel keeps its physical position.
    """
    if vol.shape != lab.shape:
        raise ShapeError(f"volume {vol.shape} vs labels {lab.shape}")
    lo, hi = foreground_bounding_box(lab, margin)
    sl = tuple(slice(a, b) for a, b in zip(lo, hi))
    new_origin = tuple(np.asarray(vol.origin) + lo * np.asarray(vol.spacing))
    cropped_vol = replace(vol, data=vol.data[sl], origin=new_origin)
    cropped_lab = replace(lab, data=lab.data[sl], origin=new_origin)
    return cropped_vol, cropped_lab


# ---------------------------------------------------------------------------
# patch grids
# ---------------------------------------------------------------------------

DEFAULT_PATCH = 160
# ~25% overlap between neighboring patches
DEFAULT_STRIDE = 120


@dataclass(frozen=True)
class PatchGrid:
    """Corner offsets of a sliding-window decomposition.

    Every patch lies fully inside the (edge-padded) extent and the union of
    patches covers it; the final offset per axis is clamped so the last patch
    touches the boundary.
    """

    patch_size: tuple[int, int, int]
    stride: tuple[int, int, int]
    extent: tuple[int, int, int]          # padded shape the offsets address
    offsets: tuple[tuple[int, int, int], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.offsets)


def _axis_offsets(extent: int, patch: int, stride: int) -> list[int]:
    if extent <= patch:
        return [0]
    offs = list(range(0, extent - patch + 1, stride))
    if offs[-1] != extent - patch:
        offs.append(extent - patch)
    return offs


def make_patch_grid(
    shape: Sequence[int],
    patch_size: int | Sequence[int] = DEFAULT_PATCH,
    stride: int | Sequence[int] = DEFAULT_STRIDE,
) -> PatchGrid:
    """Sliding-window offsets covering ``shape``.

    Volumes smaller than the patch are treated as edge-padded up to the patch
    size (see :func:`extract_patch`), so a single offset at the origin is
    returned for those axes.
    """
    patch = tuple(np.broadcast_to(patch_size, 3).astype(int))
    strd = tuple(np.broadcast_to(stride, 3).astype(int))
    if any(s <= 0 for s in strd) or any(p <= 0 for p in patch):
        raise ValueError("patch size and stride must be positive")
    if any(s > p for s, p in zip(strd, patch)):
        raise ValueError(f"stride {strd} beyond patch {patch} would leave gaps")
    extent = tuple(max(int(s), p) for s, p in zip(shape, patch))
    per_axis = [_axis_offsets(e, p, s) for e, p, s in zip(extent, patch, strd)]
    offsets = tuple(
        (i, j, k) for i in per_axis[0] for j in per_axis[1] for k in per_axis[2]
    )
    return PatchGrid(patch_size=patch, stride=strd, extent=extent, offsets=offsets)


def extract_patch(data: np.ndarray, corner: Sequence[int], size: Sequence[int]) -> np.ndarray:
    """Extract a patch, edge-replicating past the array bounds.

    ``corner`` may be negative or reach past the array; replication keeps
    intensities continuous across the synthetic border.
    """
    corner = np.asarray(corner, dtype=int)
    size = np.asarray(size, dtype=int)
    lo = np.maximum(corner, 0)
    hi = np.minimum(corner + size, data.shape)
    if np.any(hi <= lo):
        raise ShapeError(f"patch at {tuple(corner)} size {tuple(size)} misses the array")
    core = data[tuple(slice(a, b) for a, b in zip(lo, hi))]
    pad = [(int(lo[a] - corner[a]), int(corner[a] + size[a] - hi[a])) for a in range(3)]
    if any(p != (0, 0) for p in pad):
        core = np.pad(core, pad, mode="edge")
    return core


def merge_patches(
    patch_probs: Iterable[tuple[Sequence[int], np.ndarray]],
    shape: Sequence[int],
) -> np.ndarray:
    """Fuse overlapping per-class probability patches by uniform averaging.

    Patches are accumulated in sorted-offset order so the result is
    bit-reproducible regardless of the order they were produced in.  Output
    has shape ``(C, *shape)`` with per-voxel class probabilities renormalized
    to sum to one.

    Each item is ``(corner, probs)`` with ``probs`` of shape ``(C, px, py, pz)``;
    parts of a patch hanging past ``shape`` (from edge padding) are ignored.
    """
    items = sorted(patch_probs, key=lambda it: tuple(it[0]))
    if not items:
        raise CoverageGap("no patches supplied")
    n_classes = items[0][1].shape[0]
    shape = tuple(int(s) for s in shape)
    acc = np.zeros((n_classes,) + shape, dtype=np.float64)
    cover = np.zeros(shape, dtype=np.int32)
    for corner, probs in items:
        if probs.shape[0] != n_classes:
            raise ShapeError("inconsistent class count across patches")
        corner = np.asarray(corner, dtype=int)
        psize = np.asarray(probs.shape[1:], dtype=int)
        lo = np.maximum(corner, 0)
        hi = np.minimum(corner + psize, shape)
        if np.any(hi <= lo):
            continue
        src = tuple(slice(a - c, b - c) for a, b, c in zip(lo, hi, corner))
        dst = tuple(slice(a, b) for a, b in zip(lo, hi))
        acc[(slice(None),) + dst] += probs[(slice(None),) + src]
        cover[dst] += 1
    if (cover == 0).any():
        raise CoverageGap(f"{int((cover == 0).sum())} voxels not covered by any patch")
    acc /= cover
    total = acc.sum(axis=0)
    acc /= np.where(total > 0, total, 1.0)
    return acc


# ---------------------------------------------------------------------------
# sagittal mirroring
# ---------------------------------------------------------------------------

def flip_sagittal(
    x: Volume | LabelMap,
    labels: StagingLabels | None = None,
):
    """Mirror a volume or label map across the sagittal plane.

    Laterality toggles left<->right; staging grades are returned unchanged
    because the mirrored joint is the physiological counterpart with the same
    pathology severity.  Involution: flipping twice restores the input.
    """
    if x.sagittal_axis is None:
        raise OrientationUnknown("volume does not declare a sagittal axis")
    flipped = replace(
        x,
        data=np.flip(x.data, axis=x.sagittal_axis).copy(),
        laterality=_FLIP_SIDE[x.laterality],
    )
    if labels is None:
        return flipped
    return flipped, labels
