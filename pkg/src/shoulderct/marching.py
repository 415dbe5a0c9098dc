"""Isosurface extraction with classic 256-case lookup-table marching cubes.

The scalar field is sampled at voxel centers; surface vertices are placed by
linear interpolation along grid edges whose endpoints straddle the iso level,
then mapped to world millimeters through the volume spacing and origin.
Triangles are wound so normals point out of the high-valued region (outward
for occupancy masks).

The whole pass is vectorized: crossing edges become shared vertices once per
global grid edge, and per-cube triangles are gathered from the lookup table
with fancy indexing, so the cost is a handful of full-grid numpy operations.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from ._mc_tables import TRI_TABLE
from .errors import EmptySurface
from .mesh import TriMesh

# corner c of a cube at (i, j, k) sits at (i, j, k) + CORNER_OFF[c]
CORNER_OFF = np.array([
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
], dtype=np.int64)

# local edge -> (axis, corner offset of the edge's low end)
EDGE_AXIS = np.array([0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2], dtype=np.int64)
EDGE_OFF = np.array([
    (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 0),
    (0, 0, 1), (1, 0, 1), (0, 1, 1), (0, 0, 1),
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
], dtype=np.int64)


def _edge_vertices(field: np.ndarray, below: np.ndarray, iso: float, axis: int):
    """Interpolated vertex (index-space) for every crossing edge along ``axis``.

    Returns (vertex positions (K, 3), id grid with -1 where the edge does not
    cross)."""
    lo = tuple(slice(0, -1) if a == axis else slice(None) for a in range(3))
    hi = tuple(slice(1, None) if a == axis else slice(None) for a in range(3))
    crossing = below[lo] != below[hi]
    ids = np.full(crossing.shape, -1, dtype=np.int64)
    n = int(crossing.sum())
    ids[crossing] = np.arange(n)
    base = np.argwhere(crossing).astype(np.float64)
    f0 = field[lo][crossing].astype(np.float64)
    f1 = field[hi][crossing].astype(np.float64)
    t = np.clip((iso - f0) / (f1 - f0), 0.0, 1.0)
    base[:, axis] += t
    return base, ids


def marching_cubes(
    field: np.ndarray,
    iso: float = 0.5,
    spacing=(1.0, 1.0, 1.0),
    origin=(0.0, 0.0, 0.0),
    smooth_sigma: float = 0.0,
) -> TriMesh:
    """Extract the ``field == iso`` surface as a world-coordinate mesh.

    ``smooth_sigma`` > 0 applies one Gaussian pass (in voxels) before
    extraction, which rounds the staircase of binary masks; it is off by
    default so the surface stays faithful to the raw segmentation.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3 or min(field.shape) < 2:
        raise EmptySurface(f"field of shape {field.shape} cannot hold a surface")
    if smooth_sigma > 0:
        field = gaussian_filter(field, smooth_sigma)
    below = field < iso
    if below.all() or not below.any():
        raise EmptySurface("field never crosses the iso level")

    # cube case index: bit c set when corner c is below iso
    shape = tuple(s - 1 for s in field.shape)
    index = np.zeros(shape, dtype=np.int32)
    for c, (dx, dy, dz) in enumerate(CORNER_OFF):
        sl = (slice(dx, dx + shape[0]), slice(dy, dy + shape[1]), slice(dz, dz + shape[2]))
        index |= below[sl].astype(np.int32) << c

    verts_parts, id_grids, offsets = [], [], []
    total = 0
    for axis in range(3):
        pos, ids = _edge_vertices(field, below, iso, axis)
        verts_parts.append(pos)
        ids[ids >= 0] += total
        id_grids.append(ids)
        offsets.append(total)
        total += len(pos)
    vertices = np.concatenate(verts_parts, axis=0)

    active = np.argwhere(index != 0)
    if len(active) == 0:
        raise EmptySurface("no active cubes at this iso level")
    cases = index[tuple(active.T)]
    tri_edges = TRI_TABLE[cases][:, :15].reshape(-1, 5, 3)
    valid = tri_edges[:, :, 0] >= 0
    cube_of_tri = np.repeat(np.arange(len(active)), 5)[valid.reshape(-1)]
    local = tri_edges.reshape(-1, 3)[valid.reshape(-1)]

    # resolve (cube, local edge) -> global vertex id
    tri_ids = np.empty(local.shape, dtype=np.int64)
    cube_pos = active[cube_of_tri]
    for corner in range(3):
        e = local[:, corner]
        pos = cube_pos + EDGE_OFF[e]
        ax = EDGE_AXIS[e]
        ids = np.empty(len(e), dtype=np.int64)
        for axis in range(3):
            sel = ax == axis
            if sel.any():
                p = pos[sel]
                ids[sel] = id_grids[axis][p[:, 0], p[:, 1], p[:, 2]]
        tri_ids[:, corner] = ids
    if (tri_ids < 0).any():
        raise AssertionError("lookup produced an edge with no crossing")

    # with case bits set on below-iso corners, the table winding already
    # points normals away from the high-valued (inside) region
    world = np.asarray(origin, dtype=np.float64) + vertices * np.asarray(spacing, dtype=np.float64)
    return TriMesh(world, tri_ids).drop_degenerate()
