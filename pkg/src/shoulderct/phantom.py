"""Parametric synthetic shoulder phantoms with analytic ground truth.

Geometry (world mm, array axes x = left/right, y = postero/anterior,
z = infero/superior):

* humerus: head sphere plus an inferior shaft cylinder.  Osteophytes are
  radial bumps with Gaussian angular profiles on the antero-inferior head
  sector; the bump apex height is exactly the requested size, so the
  morphologic-vs-cleared surface distance reproduces it.
* scapula: a spherical-shell socket (cone-limited cap wrapping the head
  across the joint gap) plus a thin medial blade.  The shell is carved away
  wherever it would touch the displaced head, so labels never overlap.
* eccentricity: the head translates in the anterior/superior plane while the
  socket stays anchored to the concentric position, mimicking humeral
  subluxation.

Every scalar field is a smooth signed quantity (positive inside), so
marching cubes recovers surfaces with sub-voxel accuracy and the voxelized
labels agree with the analytic staging parameters.  A case is fully
determined by its spec (including the noise seed).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GridOverflow, RangeError
from .marching import marching_cubes
from .mesh import TriMesh, write_stl
from .nifti import write_labelmap, write_volume
from .staging import stage_hsa, stage_js, stage_os
from .volume import LabelMap, StagingLabels, Volume

SOFT_TISSUE_HU = 40.0
TRABECULAR_HU = 300.0
CORTICAL_HU = 1200.0
CORTICAL_THICKNESS_MM = 1.5
MIN_CLEARANCE_MM = 0.3   # carve margin between scapula and the (bumpy) head

# subchondral sclerosis: articular cortex densifies as the joint space
# closes (smooth function of the physical gap, saturating when the space
# becomes radiographically undetectable)
SCLEROSIS_MAX_HU = 600.0
SCLEROSIS_MID_GAP_MM = 1.2
SCLEROSIS_SOFTNESS_MM = 0.35
SCLEROSIS_DEPTH_MM = 3.0


def sclerosis_boost(joint_gap: float) -> float:
    """Extra articular-cortex HU as the joint space narrows."""
    return float(SCLEROSIS_MAX_HU / (
        1.0 + np.exp((joint_gap - SCLEROSIS_MID_GAP_MM) / SCLEROSIS_SOFTNESS_MM)
    ))


@dataclass(frozen=True)
class PhantomSpec:
    """Full parameterization of one synthetic shoulder."""

    head_radius: float = 22.0
    shaft_radius: float = 9.0
    shaft_length: float = 35.0
    glenoid_radius: float = 27.0      # socket inner-surface radius of curvature
    shell_thickness: float = 4.0
    cone_angle_deg: float = 60.0      # socket angular half-extent
    joint_gap: float = 2.0
    osteophyte_size: float = 0.0      # bump apex height s_o
    osteophyte_count: int = 3
    bump_width_mm: float = 6.0        # angular Gaussian sigma, as arc length
    bump_spread: float = 0.22         # placement scatter around the sector center
    eccentric_offset: float = 0.0     # head displacement e
    eccentric_direction: tuple[float, float] = (0.0, 1.0)  # (anterior y, superior z)
    blade_length: float = 15.0
    blade_half_y: float = 3.5
    blade_half_z: float = 15.0
    spacing: float = 1.0
    noise_std: float = 25.0
    side: str = "right"
    rng_seed: int = 0
    margin_mm: float = 5.0
    grid_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        if min(self.head_radius, self.shaft_radius, self.glenoid_radius) <= 0:
            raise ValueError("radii must be positive")
        if self.joint_gap < 0 or self.osteophyte_size < 0 or self.eccentric_offset < 0:
            raise ValueError("gap, osteophyte size, and offset must be >= 0")
        if self.glenoid_radius < self.head_radius + self.joint_gap:
            raise ValueError("socket radius must reach around head + gap")
        if self.side not in ("left", "right"):
            raise ValueError("side must be left or right")

    @property
    def medial_axis(self) -> np.ndarray:
        """Unit vector from the head toward the glenoid."""
        return np.array([-1.0, 0.0, 0.0]) if self.side == "right" else np.array([1.0, 0.0, 0.0])

    def staging(self) -> StagingLabels:
        return StagingLabels(
            os=stage_os(self.osteophyte_size),
            js=stage_js(self.joint_gap),
            hsa=stage_hsa(self.eccentric_offset, self.glenoid_radius),
        )


@dataclass(frozen=True)
class PhantomCase:
    spec: PhantomSpec
    volume: Volume
    labels: LabelMap
    morph_mesh: TriMesh
    cleared_mesh: TriMesh
    staging: StagingLabels
    info: dict


# ---------------------------------------------------------------------------
# analytic geometry
# ---------------------------------------------------------------------------

RIDGE_POLAR = np.deg2rad(138.0)  # collar crest sits well below the equator
RIDGE_AZ_START = -0.45           # slightly medial of anterior, then wraps lateral
NODULE_HEIGHT_FRACTION = 0.5
NODULE_WIDTH_MM = 3.0


def _bump_directions(spec: PhantomSpec) -> np.ndarray:
    """Unit directions of discrete nodules scattered along the collar crest."""
    g = np.random.default_rng(spec.rng_seed + 101)
    n = spec.osteophyte_count
    if n == 0:
        return np.zeros((0, 3))
    azimuths = RIDGE_AZ_START + np.linspace(0.0, spec.bump_spread, n) \
        + g.normal(scale=0.08, size=n)
    lateral_sign = 1.0 if spec.side == "right" else -1.0
    polar = RIDGE_POLAR + g.normal(scale=0.05, size=n)
    dirs = np.column_stack([
        lateral_sign * np.sin(polar) * np.sin(azimuths),
        np.sin(polar) * np.cos(azimuths),
        np.cos(polar),
    ])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _bump_profile(spec: PhantomSpec, unit_dirs: np.ndarray, bumps: np.ndarray) -> np.ndarray:
    """Radial excess per query direction: collar ridge plus nodule texture.

    The spur complex is a smooth ridge at ``RIDGE_POLAR`` whose azimuthal
    extent is ``bump_spread`` (anterior wrapping toward lateral/posterior,
    mirrored per side, never toward the glenoid) with apex height exactly
    ``osteophyte_size``; discrete half-height nodules add texture along the
    crest without changing the apex.
    """
    if spec.osteophyte_size <= 0:
        return np.zeros(unit_dirs.shape[:-1])
    lateral_sign = 1.0 if spec.side == "right" else -1.0
    polar = np.arccos(np.clip(unit_dirs[..., 2], -1.0, 1.0))
    azimuth = np.arctan2(lateral_sign * unit_dirs[..., 0], unit_dirs[..., 1])

    sigma_polar = spec.bump_width_mm / spec.head_radius
    ridge = np.exp(-(((polar - RIDGE_POLAR) / sigma_polar) ** 2))
    az_center = RIDGE_AZ_START + spec.bump_spread / 2.0
    az_outside = np.maximum(np.abs(azimuth - az_center) - spec.bump_spread / 2.0, 0.0)
    window = np.exp(-((az_outside / 0.3) ** 2))
    excess = spec.osteophyte_size * ridge * window

    if len(bumps):
        sigma_nodule = NODULE_WIDTH_MM / spec.head_radius
        height = NODULE_HEIGHT_FRACTION * spec.osteophyte_size
        for b in bumps:
            angle = np.arccos(np.clip(unit_dirs @ b, -1.0, 1.0))
            np.maximum(excess, height * np.exp(-((angle / sigma_nodule) ** 2)), out=excess)
    return excess


class _Geometry:
    """Analytic centers and fields shared by voxelization and meshing."""

    def __init__(self, spec: PhantomSpec):
        self.spec = spec
        m = spec.medial_axis
        ey, ez = spec.eccentric_direction
        norm = np.hypot(ey, ez)
        shift = np.array([0.0, ey, ez]) / (norm if norm > 0 else 1.0)
        self.concentric_center = np.zeros(3)
        self.head_center = self.concentric_center + spec.eccentric_offset * shift
        # socket anchored to the concentric head position
        self.socket_center = self.concentric_center - (
            spec.glenoid_radius - spec.head_radius - spec.joint_gap
        ) * m
        self.medial = m
        self.cone_cos = np.cos(np.deg2rad(spec.cone_angle_deg))
        self.bumps = _bump_directions(spec)
        self.blade_anchor = self.socket_center + (spec.glenoid_radius + spec.shell_thickness / 2) * m

    def humerus_field(self, pts: np.ndarray, with_bumps: bool = True) -> np.ndarray:
        spec = self.spec
        rel = pts - self.head_center
        dist = np.linalg.norm(rel, axis=-1)
        safe = np.maximum(dist, 1e-9)
        radius = np.full(dist.shape, spec.head_radius)
        if with_bumps and spec.osteophyte_size > 0:
            radius = spec.head_radius + _bump_profile(spec, rel / safe[..., None], self.bumps)
        head = radius - dist
        rho = np.linalg.norm(rel[..., :2], axis=-1)
        shaft = np.minimum.reduce([
            spec.shaft_radius - rho,
            rel[..., 2] + spec.shaft_length,
            -rel[..., 2] + 1e-9,
        ])
        return np.maximum(head, shaft)

    def scapula_field(self, pts: np.ndarray) -> np.ndarray:
        spec = self.spec
        rel = pts - self.socket_center
        dist = np.linalg.norm(rel, axis=-1)
        safe = np.maximum(dist, 1e-9)
        cos_angle = (rel @ self.medial) / safe
        shell = np.minimum.reduce([
            dist - spec.glenoid_radius,
            spec.glenoid_radius + spec.shell_thickness - dist,
            (cos_angle - self.cone_cos) * spec.glenoid_radius,
        ])
        s = (pts - self.blade_anchor) @ self.medial
        blade = np.minimum.reduce([
            s + spec.shell_thickness / 2,
            spec.blade_length - s,
            spec.blade_half_y - np.abs(pts[..., 1] - self.blade_anchor[1]),
            spec.blade_half_z - np.abs(pts[..., 2] - self.blade_anchor[2]),
        ])
        scap = np.maximum(shell, blade)
        # carve: keep clear of the (bumpy) head surface
        rel_h = pts - self.head_center
        dist_h = np.linalg.norm(rel_h, axis=-1)
        radius = np.full(dist_h.shape, spec.head_radius)
        if spec.osteophyte_size > 0:
            radius = spec.head_radius + _bump_profile(
                spec, rel_h / np.maximum(dist_h, 1e-9)[..., None], self.bumps
            )
        return np.minimum(scap, dist_h - (radius + MIN_CLEARANCE_MM))

    def _cap_directions(self, n: int = 20000) -> np.ndarray:
        """Fibonacci lattice over the socket cone cap around the medial axis."""
        i = np.arange(n) + 0.5
        cos_t = 1.0 - (1.0 - self.cone_cos) * i / n
        sin_t = np.sqrt(1.0 - cos_t ** 2)
        phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
        u = np.array([0.0, 1.0, 0.0])
        v = np.cross(self.medial, u)
        v /= np.linalg.norm(v)
        return (cos_t[:, None] * self.medial
                + sin_t[:, None] * (np.cos(phi)[:, None] * u + np.sin(phi)[:, None] * v))

    def _head_radius_at(self, unit_dirs: np.ndarray) -> np.ndarray:
        radius = np.full(unit_dirs.shape[:-1], self.spec.head_radius)
        if self.spec.osteophyte_size > 0:
            radius = self.spec.head_radius + _bump_profile(self.spec, unit_dirs, self.bumps)
        return radius

    def glenoid_point(self) -> np.ndarray:
        """Continuum reference for the glenoid contact point.

        Densely samples the scapula surface facing the head: the inner socket
        cap minus the part carved away by the displaced head, plus the carve
        face itself when the head is in contact.  Near-minimal-distance
        points are averaged with the same band rule the voxel pipeline uses,
        so the two routes agree up to discretization.
        """
        from .ghjoint import GLENOID_BAND_MM

        spec = self.spec
        cap = self.socket_center + spec.glenoid_radius * self._cap_directions()
        rel = cap - self.head_center
        dist = np.linalg.norm(rel, axis=1)
        radius = self._head_radius_at(rel / np.maximum(dist, 1e-9)[:, None])
        surviving = [cap[dist >= radius + MIN_CLEARANCE_MM]]

        # carve face: head-offset surface clipped to the shell volume
        n = 20000
        i = np.arange(n) + 0.5
        cos_t = 1.0 - 2.0 * i / n
        sin_t = np.sqrt(1.0 - cos_t ** 2)
        phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
        dirs = np.column_stack([cos_t, sin_t * np.cos(phi), sin_t * np.sin(phi)])
        face = self.head_center + (self._head_radius_at(dirs) + MIN_CLEARANCE_MM)[:, None] * dirs
        rel_g = face - self.socket_center
        dist_g = np.linalg.norm(rel_g, axis=1)
        in_shell = (
            (dist_g >= spec.glenoid_radius)
            & (dist_g <= spec.glenoid_radius + spec.shell_thickness)
            & ((rel_g @ self.medial) / np.maximum(dist_g, 1e-9) >= self.cone_cos)
        )
        surviving.append(face[in_shell])

        # rim side wall: the cone-edge annulus is the nearest surface when
        # the head rides past the socket opening
        sin_cone = np.sqrt(1.0 - self.cone_cos ** 2)
        u = np.array([0.0, 1.0, 0.0])
        v = np.cross(self.medial, u)
        v /= np.linalg.norm(v)
        phi_w = np.linspace(0.0, 2 * np.pi, 720, endpoint=False)
        edge_dirs = (self.cone_cos * self.medial
                     + sin_cone * (np.cos(phi_w)[:, None] * u + np.sin(phi_w)[:, None] * v))
        radii_w = np.linspace(spec.glenoid_radius, spec.glenoid_radius + spec.shell_thickness, 24)
        wall = (self.socket_center + radii_w[:, None, None] * edge_dirs[None]).reshape(-1, 3)
        rel_w = wall - self.head_center
        dist_w = np.linalg.norm(rel_w, axis=1)
        radius_w = self._head_radius_at(rel_w / np.maximum(dist_w, 1e-9)[:, None])
        surviving.append(wall[dist_w >= radius_w + MIN_CLEARANCE_MM])

        pts = np.concatenate([p for p in surviving if len(p)], axis=0)
        if len(pts) == 0:
            pts = cap
        d = np.linalg.norm(pts - self.head_center, axis=1)
        near = d <= d.min() + GLENOID_BAND_MM
        return pts[near].mean(axis=0)

    def joint_center(self) -> np.ndarray:
        return (self.head_center + self.glenoid_point()) / 2.0

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        spec = self.spec
        r_out = spec.glenoid_radius + spec.shell_thickness
        sin_cone = np.sqrt(1.0 - self.cone_cos ** 2)
        pts = [
            self.head_center - (spec.head_radius + spec.osteophyte_size),
            self.head_center + (spec.head_radius + spec.osteophyte_size),
            self.head_center + np.array([0, 0, -spec.shaft_length]),
            self.socket_center + r_out * self.medial,
            self.socket_center + r_out * sin_cone * np.array([0, 1, 1])
            + r_out * self.cone_cos * self.medial,
            self.socket_center - r_out * sin_cone * np.array([0, 1, 1]),
            self.blade_anchor + spec.blade_length * self.medial
            + np.array([0, spec.blade_half_y, spec.blade_half_z]),
            self.blade_anchor + spec.blade_length * self.medial
            - np.array([0, spec.blade_half_y, spec.blade_half_z]),
        ]
        pts = np.asarray(pts)
        return pts.min(axis=0) - spec.margin_mm, pts.max(axis=0) + spec.margin_mm


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def generate_phantom(spec: PhantomSpec) -> PhantomCase:
    geo = _Geometry(spec)
    lo, hi = geo.bounds()
    shape = tuple(int(np.ceil(s)) for s in (hi - lo) / spec.spacing)
    if spec.grid_shape is not None:
        if any(n > g for n, g in zip(shape, spec.grid_shape)):
            raise GridOverflow(f"geometry needs {shape} voxels, grid is {spec.grid_shape}")
        shape = tuple(spec.grid_shape)
    origin = tuple(lo)

    idx = np.indices(shape, dtype=np.float64)
    pts = np.stack(idx, axis=-1) * spec.spacing + lo

    hum = geo.humerus_field(pts)
    scap = geo.scapula_field(pts)

    labels = np.zeros(shape, dtype=np.uint8)
    labels[scap >= 0] = 2
    labels[hum >= 0] = 1

    hu = np.full(shape, SOFT_TISSUE_HU)
    for fld in (hum, scap):
        inside = fld >= 0
        hu[inside] = np.where(
            fld[inside] >= CORTICAL_THICKNESS_MM, TRABECULAR_HU, CORTICAL_HU
        )
    if spec.osteophyte_size > 0:
        # osteophytes are corticated new bone: everything outside the cleared
        # head sphere renders dense
        dist_head = np.linalg.norm(pts - geo.head_center, axis=-1)
        spur = (hum >= 0) & (dist_head > spec.head_radius)
        hu[spur] = CORTICAL_HU
    boost = sclerosis_boost(spec.joint_gap)
    if boost > 1.0:
        rel_h = pts - geo.head_center
        dist_h = np.linalg.norm(rel_h, axis=-1)
        cos_h = (rel_h @ geo.medial) / np.maximum(dist_h, 1e-9)
        rel_g = pts - geo.socket_center
        dist_g = np.linalg.norm(rel_g, axis=-1)
        cos_g = (rel_g @ geo.medial) / np.maximum(dist_g, 1e-9)
        sclerotic = (
            ((hum >= 0) & (hum < SCLEROSIS_DEPTH_MM) & (cos_h >= geo.cone_cos))
            | ((scap >= 0) & (cos_g >= geo.cone_cos)
               & (dist_g <= spec.glenoid_radius + SCLEROSIS_DEPTH_MM))
        )
        hu[sclerotic] = CORTICAL_HU + boost
    if spec.noise_std > 0:
        g = np.random.default_rng(spec.rng_seed)
        hu = hu + g.normal(scale=spec.noise_std, size=shape)

    spacing3 = (spec.spacing,) * 3
    volume = Volume(data=hu.astype(np.float32), spacing=spacing3, origin=origin,
                    laterality=spec.side)
    labelmap = LabelMap(data=labels, spacing=spacing3, origin=origin, laterality=spec.side)

    morph = marching_cubes(hum, iso=0.0, spacing=spacing3, origin=origin)
    if spec.osteophyte_size > 0:
        cleared_field = geo.humerus_field(pts, with_bumps=False)
        cleared = marching_cubes(cleared_field, iso=0.0, spacing=spacing3, origin=origin)
    else:
        cleared = morph

    info = {
        "head_center": geo.head_center.tolist(),
        "concentric_center": geo.concentric_center.tolist(),
        "socket_center": geo.socket_center.tolist(),
        "medial_axis": geo.medial.tolist(),
        "cone_cos": float(geo.cone_cos),
        "glenoid_point": geo.glenoid_point().tolist(),
        "joint_center": geo.joint_center().tolist(),
        "head_radius": spec.head_radius,
        "glenoid_radius": spec.glenoid_radius,
    }
    return PhantomCase(
        spec=spec,
        volume=volume,
        labels=labelmap,
        morph_mesh=morph,
        cleared_mesh=cleared,
        staging=spec.staging(),
        info=info,
    )


def articular_voxel_masks(case: PhantomCase) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of the articulating surfaces (head cap, glenoid face).

    Derived from the analytic geometry, independent of any fitted quantities;
    used to verify that extracted joint boxes contain both surfaces.
    """
    from .edt import class_boundary

    spec = case.spec
    info = case.info
    origin = np.asarray(case.labels.origin)
    spacing = np.asarray(case.labels.spacing)
    medial = np.asarray(info["medial_axis"])

    def directions(mask, center):
        idx = np.argwhere(mask)
        world = origin + idx * spacing
        rel = world - center
        dist = np.linalg.norm(rel, axis=1)
        return idx, rel / np.maximum(dist, 1e-9)[:, None], dist

    head_sel = np.zeros(case.labels.shape, dtype=bool)
    hb = class_boundary(case.labels.data, 1)
    idx, dirs, _ = directions(hb, np.asarray(info["head_center"]))
    keep = dirs @ medial >= info["cone_cos"]
    head_sel[tuple(idx[keep].T)] = True

    glen_sel = np.zeros(case.labels.shape, dtype=bool)
    sb = class_boundary(case.labels.data, 2)
    idx, dirs, dist = directions(sb, np.asarray(info["socket_center"]))
    keep = (dirs @ medial >= info["cone_cos"]) & (
        np.abs(dist - spec.glenoid_radius) <= spec.spacing
    )
    glen_sel[tuple(idx[keep].T)] = True
    return head_sel, glen_sel


# ---------------------------------------------------------------------------
# stratified cohorts
# ---------------------------------------------------------------------------

# per-class parameter bands, guard-banded away from the staging thresholds
DEFAULT_OS_BANDS = ((0.0, 1.2), (5.0, 6.2), (8.6, 11.0))
DEFAULT_JS_BANDS = ((2.8, 4.0), (1.0, 1.7), (0.0, 0.3))
DEFAULT_HSA_BANDS = ((0.0, 0.10), (0.35, 0.45))  # fraction of glenoid radius

# spur morphology grows with protrusion height: high-grade osteophytes are
# broad exostoses whose collar wraps around the inferior head, not taller
# needles; spread below is the collar's azimuthal extent (radians)
BUMP_WIDTH_BASE_MM = 3.0
BUMP_WIDTH_PER_MM = 0.6
BUMP_SPREAD_BASE = 0.4
BUMP_SPREAD_PER_RAD = 0.24


def _validate_bands(os_bands, js_bands, hsa_bands) -> None:
    from .staging import HSA_ECCENTRIC_FRACTION

    checks = [
        (os_bands, stage_os, range(3)),
        (js_bands, stage_js, range(3)),
    ]
    for bands, stager, classes in checks:
        if len(bands) != len(classes):
            raise RangeError("need one parameter band per class")
        for c, (lo, hi) in zip(classes, bands):
            if not (lo <= hi):
                raise RangeError(f"empty band {(lo, hi)}")
            if stager(lo) != c or stager(hi) != c:
                raise RangeError(f"band {(lo, hi)} leaves class {c}")
    for c, (lo, hi) in enumerate(hsa_bands):
        if not (lo <= hi):
            raise RangeError(f"empty band {(lo, hi)}")
        if int(lo > HSA_ECCENTRIC_FRACTION) != c or int(hi > HSA_ECCENTRIC_FRACTION) != c:
            raise RangeError(f"HSA band {(lo, hi)} leaves class {c}")


def cohort_specs(
    n: int,
    seed: int = 0,
    os_bands=DEFAULT_OS_BANDS,
    js_bands=DEFAULT_JS_BANDS,
    hsa_bands=DEFAULT_HSA_BANDS,
    frequencies: dict | None = None,
    spacing: float = 1.0,
    noise_std: float = 25.0,
    head_radius_range: tuple[float, float] = (20.0, 24.0),
) -> list[PhantomSpec]:
    """Deterministic stratified specs covering every (OS, JS, HSA) cell.

    Without ``frequencies`` the 18 class cells are filled round-robin (OS
    rotating fastest), so any n >= 18 represents every combination.  With
    ``frequencies`` (task -> per-class probabilities) cells are drawn
    multinomially instead, e.g. to mirror a clinical distribution.
    """
    _validate_bands(os_bands, js_bands, hsa_bands)
    g = np.random.default_rng(seed)
    specs = []
    for i in range(n):
        if frequencies is None:
            os_c, js_c, hsa_c = i % 3, (i // 3) % 3, (i // 9) % 2
        else:
            os_c = int(g.choice(3, p=frequencies["os"]))
            js_c = int(g.choice(3, p=frequencies["js"]))
            hsa_c = int(g.choice(2, p=frequencies["hsa"]))
        head_r = float(g.uniform(*head_radius_range))
        glen_r = head_r + float(g.uniform(4.5, 6.5))
        lo, hi = os_bands[os_c]
        s_o = 0.0 if (os_c == 0 and g.random() < 0.34) else float(g.uniform(max(lo, 0.5), hi))
        gap = float(g.uniform(*js_bands[js_c]))
        if glen_r < head_r + gap + 0.5:
            glen_r = head_r + gap + 0.5
        e = float(g.uniform(*hsa_bands[hsa_c])) * glen_r
        ey = float(g.uniform(-0.4, 0.4))
        specs.append(PhantomSpec(
            head_radius=head_r,
            glenoid_radius=glen_r,
            joint_gap=gap,
            osteophyte_size=s_o,
            osteophyte_count=2 + int(s_o),
            bump_width_mm=BUMP_WIDTH_BASE_MM + BUMP_WIDTH_PER_MM * s_o,
            bump_spread=min(BUMP_SPREAD_BASE + BUMP_SPREAD_PER_RAD * s_o, 3.2),
            eccentric_offset=e,
            eccentric_direction=(ey, 1.0),
            side="right" if i % 2 == 0 else "left",
            spacing=spacing,
            noise_std=noise_std,
            rng_seed=int(g.integers(0, 2 ** 31)),
        ))
    return specs


def _jsonable(obj):
    """Tuples become lists so in-memory records equal their JSONL round trip."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def generate_cohort(
    n: int,
    out_dir: str | Path,
    seed: int = 0,
    write_meshes: bool = True,
    **cohort_kwargs,
) -> list[dict]:
    """Generate n phantoms, write volumes/labels/meshes, return the manifest.

    The manifest is also written as JSON lines to ``out_dir/manifest.jsonl``;
    the same seed always reproduces the same files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, spec in enumerate(cohort_specs(n, seed=seed, **cohort_kwargs)):
        case = generate_phantom(spec)
        case_id = f"phantom_{i:04d}"
        volume_path = out_dir / f"{case_id}_ct.nii.gz"
        label_path = out_dir / f"{case_id}_labels.nii.gz"
        write_volume(case.volume, volume_path)
        write_labelmap(case.labels, label_path)
        record = {
            "id": case_id,
            "volume_path": str(volume_path),
            "label_path": str(label_path),
            "os": case.staging.os,
            "js": case.staging.js,
            "hsa": case.staging.hsa,
            "spec": _jsonable(asdict(spec)),
            "info": _jsonable(case.info),
        }
        if write_meshes:
            morph_path = out_dir / f"{case_id}_morph.stl"
            cleared_path = out_dir / f"{case_id}_cleared.stl"
            write_stl(case.morph_mesh, morph_path)
            write_stl(case.cleared_mesh, cleared_path)
            record["morph_stl"] = str(morph_path)
            record["cleared_stl"] = str(cleared_path)
        manifest.append(record)
    with open(out_dir / "manifest.jsonl", "w") as fh:
        for record in manifest:
            fh.write(json.dumps(record) + "\n")
    return manifest


def read_manifest(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
