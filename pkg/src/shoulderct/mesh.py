"""Triangle surface meshes in millimeter world coordinates, with binary STL I/O.

STL layout (little-endian): 80-byte header, uint32 triangle count, then per
triangle 12 float32 (normal + three vertices) and a uint16 attribute word --
50 bytes per triangle.  Reading rebuilds shared vertices by welding bitwise
identical float32 coordinates, so a write/read round trip preserves the
triangle soup exactly at float32 precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMesh, FormatError

STL_HEADER_BYTES = 80
STL_RECORD = np.dtype([
    ("normal", "<3f4"),
    ("v0", "<3f4"),
    ("v1", "<3f4"),
    ("v2", "<3f4"),
    ("attr", "<u2"),
])


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh; vertices in mm."""

    vertices: np.ndarray   # (N, 3) float64
    triangles: np.ndarray  # (M, 3) int64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        v.setflags(write=False)
        t.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """Triangle corner positions, shape (M, 3, 3)."""
        return self.vertices[self.triangles]

    def normals(self) -> np.ndarray:
        """Unit normals from counterclockwise winding; zero for degenerate faces."""
        c = self.corners()
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)

    def areas(self) -> np.ndarray:
        c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def drop_degenerate(self, min_area: float = 0.0) -> "TriMesh":
        """Remove zero-area (or sub-threshold) triangles."""
        keep = self.areas() > min_area
        return TriMesh(self.vertices, self.triangles[keep])

    def is_watertight(self) -> bool:
        """True when every edge is shared by exactly two triangles."""
        if self.n_triangles == 0:
            return False
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool((counts == 2).all())

    def translated(self, offset) -> "TriMesh":
        return TriMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.triangles)


def weld_vertices(points: np.ndarray, triangles: np.ndarray) -> TriMesh:
    """Rebuild an indexed mesh from per-corner points, merging exact duplicates."""
    flat = points.reshape(-1, 3)
    unique, inverse = np.unique(flat, axis=0, return_inverse=True)
    return TriMesh(unique, inverse.reshape(triangles.shape[0], 3))


# ---------------------------------------------------------------------------
# binary STL
# ---------------------------------------------------------------------------

def write_stl(mesh: TriMesh, path: str | Path, header: str = "shoulderct binary stl") -> None:
    if mesh.n_triangles == 0:
        raise EmptyMesh("refusing to write an empty STL")
    rec = np.zeros(mesh.n_triangles, dtype=STL_RECORD)
    corners = mesh.corners().astype(np.float32)
    rec["normal"] = mesh.normals().astype(np.float32)
    rec["v0"], rec["v1"], rec["v2"] = corners[:, 0], corners[:, 1], corners[:, 2]
    head = header.encode()[:STL_HEADER_BYTES].ljust(STL_HEADER_BYTES, b"\x00")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.uint32(mesh.n_triangles).tobytes())
        fh.write(rec.tobytes())


def read_stl(path: str | Path) -> TriMesh:
    raw = Path(path).read_bytes()
    if len(raw) < STL_HEADER_BYTES + 4:
        raise FormatError(f"{path}: shorter than an STL header")
    if raw[:5] == b"solid" and (len(raw) - 84) % 50 != 0:
        raise FormatError(f"{path}: ASCII STL is not supported")
    count = int(np.frombuffer(raw, dtype="<u4", count=1, offset=STL_HEADER_BYTES)[0])
    expected = STL_HEADER_BYTES + 4 + count * STL_RECORD.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: {len(raw)} bytes, expected {expected} for {count} triangles")
    rec = np.frombuffer(raw, dtype=STL_RECORD, count=count, offset=STL_HEADER_BYTES + 4)
    points = np.stack([rec["v0"], rec["v1"], rec["v2"]], axis=1).astype(np.float64)
    triangles = np.arange(3 * count).reshape(count, 3)
    return weld_vertices(points, triangles)


# ---------------------------------------------------------------------------
# analytic sphere meshes (test fixtures and demos)
# ---------------------------------------------------------------------------

def icosphere(radius: float = 1.0, subdivisions: int = 3, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Geodesic sphere from a subdivided icosahedron, vertices snapped to the
    radius.  Chordal error is about ``0.28 * radius / 4**subdivisions``."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = np.add(verts[a], verts[b]) / 2.0
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        split = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            split += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = split
    vertices = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(vertices, np.asarray(faces))
