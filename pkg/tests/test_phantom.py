import numpy as np
import pytest

from shoulderct.errors import GridOverflow, RangeError
from shoulderct.marching import marching_cubes
from shoulderct.meshdist import max_surface_distance, surface_rmse
from shoulderct.phantom import (
    PhantomSpec,
    articular_voxel_masks,
    cohort_specs,
    generate_cohort,
    generate_phantom,
    read_manifest,
)
from shoulderct.staging import stage_os

FAST = dict(noise_std=0.0)  # noise irrelevant for geometry checks


def test_no_bump_means_identical_meshes_and_grade_zero():
    case = generate_phantom(PhantomSpec(osteophyte_size=0.0, **FAST))
    assert case.staging.os == 0
    assert case.morph_mesh is case.cleared_mesh


def test_five_mm_bump_reproduced_by_surface_distance():
    case = generate_phantom(PhantomSpec(osteophyte_size=5.0, rng_seed=3, **FAST))
    d = max_surface_distance(case.morph_mesh, case.cleared_mesh)
    assert d == pytest.approx(5.0, abs=0.5)
    assert stage_os(d) == 1
    assert case.staging.os == 1


def test_zero_gap_bone_on_bone():
    case = generate_phantom(PhantomSpec(joint_gap=0.0, **FAST))
    assert case.staging.js == 2
    hum = np.argwhere(case.labels.data == 1) * case.spec.spacing
    scap = np.argwhere(case.labels.data == 2) * case.spec.spacing
    # surfaces reach within a voxel + carve clearance of each other
    from scipy.spatial import cKDTree
    d, _ = cKDTree(hum).query(scap)
    assert d.min() <= case.spec.spacing + 0.5


def test_labels_disjoint_and_well_formed():
    case = generate_phantom(PhantomSpec(eccentric_offset=11.0, joint_gap=0.2,
                                        osteophyte_size=9.0, **FAST))
    assert set(np.unique(case.labels.data)) == {0, 1, 2}
    assert case.staging.as_dict() == {"os": 2, "js": 2, "hsa": 1}


def test_generation_deterministic():
    spec = PhantomSpec(osteophyte_size=4.0, rng_seed=11)
    a = generate_phantom(spec)
    b = generate_phantom(spec)
    assert np.array_equal(a.volume.data, b.volume.data)
    assert np.array_equal(a.labels.data, b.labels.data)


def test_voxelized_mesh_reextraction_consistency():
    spec = PhantomSpec(osteophyte_size=5.0, rng_seed=2, **FAST)
    case = generate_phantom(spec)
    from shoulderct.phantom import _Geometry
    geo = _Geometry(spec)
    remesh = marching_cubes(
        (case.labels.data == 1).astype(np.float64),
        iso=0.5,
        spacing=case.labels.spacing,
        origin=case.labels.origin,
    )
    assert surface_rmse(remesh, case.morph_mesh) < spec.spacing


def test_intensities_track_labels():
    case = generate_phantom(PhantomSpec(noise_std=0.0, rng_seed=5))
    bone = case.labels.data > 0
    assert (case.volume.data[bone] > 100).mean() >= 0.99
    assert (np.abs(case.volume.data[~bone] - 40.0) < 1).all()


def test_staging_deterministic_from_spec():
    for s_o, gap, frac, expected in [
        (0.0, 3.0, 0.0, (0, 0, 0)),
        (5.0, 1.0, 0.05, (1, 1, 0)),
        (9.0, 0.2, 0.40, (2, 2, 1)),
    ]:
        spec = PhantomSpec(osteophyte_size=s_o, joint_gap=gap,
                           eccentric_offset=frac * 27.0, **FAST)
        assert tuple(spec.staging().as_dict().values()) == expected


def test_articular_masks_cover_joint():
    case = generate_phantom(PhantomSpec(**FAST))
    head_m, glen_m = articular_voxel_masks(case)
    assert head_m.sum() > 100 and glen_m.sum() > 100
    # articular voxels straddle the joint center
    jc = np.asarray(case.info["joint_center"])
    head_pts = np.asarray(case.labels.origin) + np.argwhere(head_m) * case.spec.spacing
    assert np.linalg.norm(head_pts - jc, axis=1).min() < case.spec.head_radius


def test_grid_overflow():
    with pytest.raises(GridOverflow):
        generate_phantom(PhantomSpec(grid_shape=(20, 20, 20)))


def test_cohort_stratification_counts():
    specs = cohort_specs(30, seed=1)
    os_counts = np.bincount([s.staging().os for s in specs], minlength=3)
    assert (os_counts >= 8).all()
    cells = {(s.staging().os, s.staging().js, s.staging().hsa) for s in specs}
    assert len(cells) == 18


def test_cohort_deterministic_manifest(tmp_path):
    m1 = generate_cohort(3, tmp_path / "a", seed=42, write_meshes=False)
    m2 = generate_cohort(3, tmp_path / "b", seed=42, write_meshes=False)
    for r1, r2 in zip(m1, m2):
        assert r1["spec"] == r2["spec"]
        assert (r1["os"], r1["js"], r1["hsa"]) == (r2["os"], r2["js"], r2["hsa"])


def test_cohort_files_and_manifest_round_trip(tmp_path):
    records = generate_cohort(2, tmp_path, seed=7)
    again = read_manifest(tmp_path)
    assert again == records
    from pathlib import Path
    for rec in records:
        for key in ("volume_path", "label_path", "morph_stl", "cleared_stl"):
            assert Path(rec[key]).exists()


def test_cohort_configurable_frequencies():
    freqs = {"os": [0.311, 0.361, 0.328], "js": [0.382, 0.272, 0.346], "hsa": [0.561, 0.439]}
    specs = cohort_specs(60, seed=3, frequencies=freqs)
    labels = [s.staging().os for s in specs]
    assert set(labels) == {0, 1, 2}
    assert specs == cohort_specs(60, seed=3, frequencies=freqs)


def test_bad_bands_raise():
    with pytest.raises(RangeError):
        cohort_specs(5, os_bands=((0.0, 3.5), (3.8, 6.4), (7.8, 11.5)))
    with pytest.raises(RangeError):
        cohort_specs(5, hsa_bands=((0.0, 0.3), (0.35, 0.45)))
