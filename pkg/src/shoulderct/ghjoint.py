"""Deterministic glenohumeral joint localization.

The humeral head is found by fitting a sphere to the surface points of the
proximal third of the humerus: the third is selected along the bone's
principal axis, choosing the end with the larger radial spread (the head is
wider than the shaft).  The joint center is the midpoint between the fitted
head center and the nearest scapula surface point (on the glenoid face), and
the classification patch is a fixed-size box centered there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edt import class_boundary
from .errors import InsufficientSurface, MissingScapula
from .mesh import TriMesh
from .volume import HUMERUS, SCAPULA, LabelMap

MIN_SURFACE_POINTS = 50
# surface points within this band of the minimum distance average into the
# glenoid contact point; a single nearest voxel is unstable when the head
# rides on the socket rim and many points tie
GLENOID_BAND_MM = 1.0


@dataclass(frozen=True)
class HeadFit:
    """Fitted humeral-head sphere in world millimeters."""

    center: np.ndarray     # (3,)
    radius: float
    rms_residual: float
    inlier_count: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"non-positive fitted radius {self.radius}")


def fit_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Algebraic least-squares sphere (Coope linearization)."""
    points = np.asarray(points, dtype=np.float64)
    a = np.column_stack([2.0 * points, np.ones(len(points))])
    b = (points ** 2).sum(axis=1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    center = sol[:3]
    radius = float(np.sqrt(max(sol[3] + (center ** 2).sum(), 0.0)))
    return center, radius


def _refine_sphere(points: np.ndarray, center: np.ndarray, radius: float):
    """One Gauss-Newton pass on the geometric residual |p - c| - R."""
    diff = points - center
    dist = np.linalg.norm(diff, axis=1)
    dist = np.maximum(dist, 1e-12)
    r = dist - radius
    jac = np.column_stack([-diff / dist[:, None], -np.ones(len(points))])
    delta, *_ = np.linalg.lstsq(jac, -r, rcond=None)
    return center + delta[:3], radius + float(delta[3])


def _proximal_third(points: np.ndarray) -> np.ndarray:
    """Surface points of the head-end third along the principal axis."""
    mean = points.mean(axis=0)
    centered = points - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    t = centered @ axis
    span = t.max() - t.min()
    if span <= 0:
        return points
    radial = np.linalg.norm(centered - np.outer(t, axis), axis=1)
    high = t > t.max() - span / 3.0
    low = t < t.min() + span / 3.0
    # the head end has the larger radial spread
    head_mask = high if radial[high].mean() >= radial[low].mean() else low
    return points[head_mask]


def fit_humeral_head(humerus: LabelMap | TriMesh) -> HeadFit:
    """Sphere fit over the proximal-third surface of the humerus."""
    if isinstance(humerus, TriMesh):
        surface = humerus.vertices
    else:
        boundary = class_boundary(humerus.data, HUMERUS)
        idx = np.argwhere(boundary)
        surface = np.asarray(humerus.origin) + idx * np.asarray(humerus.spacing)
    if len(surface) < MIN_SURFACE_POINTS:
        raise InsufficientSurface(f"{len(surface)} surface points < {MIN_SURFACE_POINTS}")
    head_points = _proximal_third(surface)
    if len(head_points) < MIN_SURFACE_POINTS:
        head_points = surface
    center, radius = fit_sphere(head_points)
    center, radius = _refine_sphere(head_points, center, radius)
    residuals = np.linalg.norm(head_points - center, axis=1) - radius
    rms = float(np.sqrt((residuals ** 2).mean()))
    inliers = int((np.abs(residuals) <= max(2.0 * rms, 1e-9)).sum())
    return HeadFit(center=center, radius=float(radius), rms_residual=rms, inlier_count=inliers)


def glenoid_point(fit: HeadFit, scapula: LabelMap) -> np.ndarray:
    """Glenoid contact point: centroid of the scapula surface points nearest
    the fitted head center (all points within ``GLENOID_BAND_MM`` of the
    minimum distance)."""
    boundary = class_boundary(scapula.data, SCAPULA)
    idx = np.argwhere(boundary)
    if len(idx) == 0:
        raise MissingScapula("no scapula surface voxels")
    world = np.asarray(scapula.origin) + idx * np.asarray(scapula.spacing)
    dist = np.linalg.norm(world - fit.center, axis=1)
    near = dist <= dist.min() + GLENOID_BAND_MM
    return world[near].mean(axis=0)


def gh_bounding_box(
    fit: HeadFit,
    scapula: LabelMap,
    side: str = "unknown",
    patch: int = 160,
) -> np.ndarray:
    """Corner indices of the ``patch``-cubed box centered on the GH joint.

    The box keeps its full size: corners are clamped inside the volume where
    it fits, and are allowed to reach past the bounds (negative or beyond)
    on axes shorter than the patch, where extraction pads by edge
    replication.  ``side`` is accepted for interface parity; the nearest
    glenoid-point rule does not need it.
    """
    target = glenoid_point(fit, scapula)
    joint_center = (np.asarray(fit.center) + target) / 2.0
    center_idx = np.round(
        (joint_center - np.asarray(scapula.origin)) / np.asarray(scapula.spacing)
    ).astype(int)
    corner = center_idx - patch // 2
    shape = np.asarray(scapula.shape)
    lo = np.minimum(0, shape - patch)
    hi = np.maximum(0, shape - patch)
    return np.clip(corner, lo, hi)
