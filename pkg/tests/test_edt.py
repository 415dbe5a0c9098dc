"""Exactness of the Euclidean distance transform against all-pairs brute force."""

import numpy as np
import pytest

from shoulderct.edt import class_boundary, exact_edt
from shoulderct.errors import EmptyClass

OFFSETS6 = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


def brute_boundary(labels, class_id):
    """Independent 6-neighbor boundary scan with explicit loops."""
    nx, ny, nz = labels.shape
    out = np.zeros(labels.shape, dtype=bool)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if labels[i, j, k] != class_id:
                    continue
                for di, dj, dk in OFFSETS6:
                    a, b, c = i + di, j + dj, k + dk
                    if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz:
                        if labels[a, b, c] != class_id:
                            out[i, j, k] = True
                            break
    return out


def brute_edt(labels, class_id):
    """O(n^2) min distance from every voxel to every boundary voxel."""
    seeds = np.argwhere(brute_boundary(labels, class_id))
    coords = np.argwhere(np.ones(labels.shape, dtype=bool))
    d2 = ((coords[:, None, :] - seeds[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    return np.sqrt(d2.astype(np.float64)).reshape(labels.shape)


def random_labels(shape, seed, n_classes=3):
    g = np.random.default_rng(seed)
    # smoothed noise gives connected blobs rather than salt-and-pepper
    field = g.normal(size=shape)
    for axis in range(3):
        field = (field + np.roll(field, 1, axis) + np.roll(field, -1, axis)) / 3.0
    edges = np.quantile(field, np.linspace(0, 1, n_classes + 1)[1:-1])
    return np.digitize(field, edges).astype(np.int64)


def test_boundary_matches_brute_scan():
    lab = random_labels((7, 6, 8), seed=3)
    for c in range(3):
        assert np.array_equal(class_boundary(lab, c), brute_boundary(lab, c))


def test_boundary_voxels_are_zero():
    lab = np.zeros((6, 6, 6), dtype=np.int64)
    lab[2:4, 2:4, 2:4] = 1
    d = exact_edt(lab, 1)
    assert np.all(d[class_boundary(lab, 1)] == 0)


def test_single_voxel_object():
    lab = np.zeros((5, 5, 5), dtype=np.int64)
    lab[2, 2, 2] = 1
    assert np.array_equal(exact_edt(lab, 1), brute_edt(lab, 1))


@pytest.mark.parametrize("seed", range(10))
def test_random_blobs_match_brute_force(seed):
    g = np.random.default_rng(seed)
    shape = tuple(g.integers(4, 13, size=3))
    lab = random_labels(shape, seed=seed)
    for c in np.unique(lab):
        assert np.array_equal(exact_edt(lab, int(c)), brute_edt(lab, int(c)))


def test_absent_class_raises():
    lab = np.zeros((4, 4, 4), dtype=np.int64)
    with pytest.raises(EmptyClass):
        exact_edt(lab, 2)


def test_full_grid_class_has_no_boundary():
    lab = np.ones((4, 4, 4), dtype=np.int64)
    assert np.all(exact_edt(lab, 1) == 0)
