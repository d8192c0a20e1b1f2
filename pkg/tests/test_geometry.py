import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_violations, random_rotations
from sixdma.geometry import (ArrayLayout, LocalArray, MovementConstraints, SiteSpace, SurfacePose,
                             canonical_angles, check_constraints, global_antenna_positions,
                             rotation_facing, rotation_matrix, surface_normal)

angles = st.floats(-20.0, 20.0, allow_nan=False)


def test_zero_rotation_is_identity():
    assert np.array_equal(rotation_matrix([0, 0, 0]), np.eye(3))


def test_quarter_turn_about_z():
    expected = np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 1]], dtype=float)
    assert np.allclose(rotation_matrix([0, 0, np.pi / 2]), expected, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles)
def test_rotation_is_proper(a, b, g):
    R = rotation_matrix([a, b, g])
    assert np.linalg.norm(R.T @ R - np.eye(3)) < 1e-12
    assert abs(np.linalg.det(R) - 1) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_canonical_angles_range(x):
    c = canonical_angles(x)
    assert 0.0 <= c < 2 * np.pi
    assert np.isclose(np.cos(c), np.cos(x), atol=1e-9) and np.isclose(np.sin(c), np.sin(x), atol=1e-9)


def test_canonical_angles_tiny_negative():
    assert canonical_angles(-1e-18) == 0.0


def test_identity_pose_keeps_offsets():
    local = LocalArray.ula(4, 0.0625)
    pose = SurfacePose(np.zeros(3), np.zeros(3))
    assert np.array_equal(global_antenna_positions(pose, local), local.offsets)


def test_pure_translation():
    local = LocalArray([[0.5, 0, 0]])
    pose = SurfacePose([1, 2, 3], [0, 0, 0])
    assert np.allclose(global_antenna_positions(pose, local), [[1.5, 2, 3]])


def test_rotated_offset():
    d = 0.3
    pose = SurfacePose(np.zeros(3), [0, 0, np.pi / 2])
    out = global_antenna_positions(pose, LocalArray([[d, 0, 0]]))
    assert np.allclose(out[0], rotation_matrix([0, 0, np.pi / 2]) @ [d, 0, 0])


@settings(max_examples=50, deadline=None)
@given(angles, angles, angles)
def test_rigid_motion_preserves_distances(a, b, g):
    local = LocalArray.ula(5, 0.0625)
    r = global_antenna_positions(SurfacePose([0.1, -0.2, 0.05], [a, b, g]), local)
    d_local = np.linalg.norm(local.offsets[:, None] - local.offsets[None], axis=-1)
    d_glob = np.linalg.norm(r[:, None] - r[None], axis=-1)
    assert np.max(np.abs(d_local - d_glob)) < 1e-12


def test_surface_normal_examples():
    local = LocalArray.ula(2, 0.0625)
    assert np.allclose(surface_normal(SurfacePose(np.zeros(3), np.zeros(3)), local), [1, 0, 0])
    n = surface_normal(SurfacePose(np.zeros(3), [0, 0, np.pi / 2]), local)
    assert np.allclose(n, [0, -1, 0], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(angles, angles, angles)
def test_surface_normal_unit(a, b, g):
    n = surface_normal(SurfacePose(np.zeros(3), [a, b, g]), LocalArray.ula(2, 0.1))
    assert abs(np.linalg.norm(n) - 1) < 1e-12


@pytest.mark.parametrize("direction", [[1, 0, 0], [0, 1, 0], [-1, -1, 0], [0.3, -0.2, 0.9]])
def test_rotation_facing(direction):
    d = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    assert np.allclose(rotation_matrix(rotation_facing(d)) @ [1, 0, 0], d, atol=1e-12)


def test_local_normal_must_be_unit():
    with pytest.raises(ValueError):
        LocalArray([[0, 0, 0]], normal=[1, 1, 0])


def test_ula_is_centered_and_uniform():
    off = LocalArray.ula(6, 0.0625).offsets
    assert np.allclose(off.mean(axis=0), 0)
    assert np.allclose(np.diff(off[:, 1]), 0.0625)


def _single(q, rot, site=SiteSpace(0.6), d_min=0.15):
    layout = ArrayLayout.uniform([q], [rot], LocalArray.ula(2, 0.0625))
    return check_constraints(layout, site, MovementConstraints(d_min))


def test_single_surface_facing_out_is_feasible():
    assert _single([0.1, 0, 0], [0, 0, 0]).feasible


def test_single_surface_facing_cpu_is_blocked():
    rep = _single([0.1, 0, 0], rotation_facing([-1, 0, 0]))
    assert rep.by_constraint("blockage") == [(0,)]


def test_coincident_surfaces_violate_distance():
    layout = ArrayLayout.uniform([[0.1, 0, 0]] * 2, [[0, 0, 0]] * 2, LocalArray.ula(2, 0.0625))
    rep = check_constraints(layout, SiteSpace(0.6), MovementConstraints(1e-6))
    assert (0, 1) in rep.by_constraint("distance")


def test_opposite_faces_outward_are_feasible():
    q = [[0.3, 0, 0], [-0.3, 0, 0]]
    rot = [rotation_facing([1, 0, 0]), rotation_facing([-1, 0, 0])]
    layout = ArrayLayout.uniform(q, rot, LocalArray.ula(2, 0.0625))
    assert check_constraints(layout, SiteSpace(0.6), MovementConstraints(0.15)).feasible


def test_surface_in_front_is_reflection():
    q = [[0.1, 0, 0], [0.25, 0, 0]]
    layout = ArrayLayout.uniform(q, [[0, 0, 0]] * 2, LocalArray.ula(2, 0.0625))
    rep = check_constraints(layout, SiteSpace(0.6), MovementConstraints(0.1))
    assert rep.by_constraint("reflection") == [(0, 1)]


def test_box_violation():
    assert _single([0.31, 0, 0], [0, 0, 0]).by_constraint("box") == [(0,)]


@pytest.mark.parametrize("seed", range(5))
def test_checker_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    site, cons = SiteSpace(0.6), MovementConstraints(0.15)
    for _ in range(20):
        B = int(rng.integers(1, 9))
        q = rng.uniform(-0.35, 0.35, size=(B, 3))
        u = random_rotations(rng, B)
        layout = ArrayLayout.uniform(q, u, LocalArray.ula(2, 0.0625))
        got = {(v.constraint, v.index) for v in check_constraints(layout, site, cons).violations}
        assert got == brute_force_violations(q, u, [1, 0, 0], cons.d_min, site.half)


def test_ragged_layout_bookkeeping():
    layout = ArrayLayout(np.zeros((2, 3)), np.zeros((2, 3)),
                         (np.zeros((3, 3)), np.zeros((1, 3))))
    assert layout.n_antennas == 4
    assert list(layout.owner) == [0, 0, 0, 1]
