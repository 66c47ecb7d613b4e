import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viewplan import shapes
from viewplan.errors import CancelledField, CorrectionFailed, DegenerateNormal
from viewplan.mesh import subdivide
from viewplan.viewgen import (ConstraintSpace, Viewpoint, altitude_correction, clearance,
                              cluster_center_and_normal, correct_viewpoint, generate_candidates,
                              generate_viewpoint, is_feasible, point_triangle_distance,
                              repulsion_correction)

from conftest import mesh_from

vec3 = st.tuples(*[st.floats(-50, 50, allow_nan=False)] * 3)


def test_center_and_normal_singleton():
    mesh = mesh_from([(0, 0, 0), (3, 0, 0), (0, 3, 0)], [(0, 1, 2)])
    C, N, degenerate = cluster_center_and_normal(mesh, [0])
    np.testing.assert_allclose(C, (1, 1, 0))
    np.testing.assert_allclose(N, (0, 0, 1))
    assert not degenerate


def test_center_and_normal_resultant_is_mean():
    mesh = mesh_from([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)], [(0, 1, 2), (0, 3, 1)])
    _, N, _ = cluster_center_and_normal(mesh, [0, 1])
    np.testing.assert_allclose(mesh.normals, [(0, 0, 1), (0, 1, 0)])
    np.testing.assert_allclose(N, (0, 0.5, 0.5))


def test_center_and_normal_cancelling():
    mesh = mesh_from([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2), (0, 2, 1)])
    _, N, degenerate = cluster_center_and_normal(mesh, [0, 1])
    assert np.linalg.norm(N) == 0.0 and degenerate


def test_generate_viewpoint_examples():
    vp = generate_viewpoint((0, 0, 0), (0, 0, 2), 10)
    np.testing.assert_allclose(vp.position, (0, 0, 10))
    np.testing.assert_allclose(vp.direction, (0, 0, -1))
    vp = generate_viewpoint((1, 1, 1), (1, 0, 0), 0.95 * 30)
    np.testing.assert_allclose(vp.position, (29.5, 1, 1))
    with pytest.raises(DegenerateNormal):
        generate_viewpoint((0, 0, 0), (0, 0, 0), 1)


@given(vec3, vec3.filter(lambda n: np.linalg.norm(n) > 1e-3), st.floats(0.1, 100))
def test_generate_viewpoint_aims_back(C, N, d):
    vp = generate_viewpoint(C, N, d)
    off = vp.position - np.asarray(C)
    assert np.linalg.norm(off) == pytest.approx(d, rel=1e-9)
    assert np.linalg.norm(vp.direction) == pytest.approx(1.0, abs=1e-9)
    assert vp.direction @ off == pytest.approx(-np.linalg.norm(off), rel=1e-9)


def test_viewpoint_direction_is_normalized():
    vp = Viewpoint((0, 0, 0), (3, 4, 0))
    np.testing.assert_allclose(vp.direction, (0.6, 0.8, 0))
    assert vp.to_dict()["cluster"] == -1


# --------------------------------------------------------------------------- corrections

def test_repulsion_none_when_clear():
    plate = shapes.flat_plate(size=4)
    far = plate.centroids.mean(axis=0) + (0, 0, 10)
    assert repulsion_correction(far, plate, 5.0) is None


def test_repulsion_single_centroid_below():
    tri = mesh_from([(0, 0, 0), (3, 0, 0), (0, 3, 0)], [(0, 1, 2)])
    np.testing.assert_allclose(repulsion_correction((1, 1, 2), tri, 5.0), (0, 0, 1))


def test_repulsion_symmetric_trap():
    mesh = mesh_from([(-1, 0, 0), (-1, 1, 0), (-1, 0, 1), (1, 0, 0), (1, 0, 1), (1, 1, 0)],
                     [(0, 1, 2), (3, 4, 5)])
    mid = mesh.centroids.mean(axis=0)
    with pytest.raises(CancelledField):
        repulsion_correction(mid, mesh, 5.0)


@given(vec3)
def test_repulsion_is_unit(P):
    v = repulsion_correction(P, shapes.house(), 8.0)
    if v is not None:
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)


def test_altitude_examples():
    np.testing.assert_allclose(altitude_correction((5, 5, 1), 3), (0, 0, 1))
    assert altitude_correction((5, 5, 4), 3) is None
    assert altitude_correction((5, 5, 3), 3) is None


def test_correct_feasible_is_noop():
    plate = shapes.flat_plate(size=10)
    vp = generate_viewpoint((5, 5, 0), (0, 0, 1), 20)
    assert correct_viewpoint(vp, (5, 5, 0), (0, 0, 1), 20, plate, ConstraintSpace()) is vp


def test_correct_too_close_to_roof():
    roof = subdivide(shapes.flat_plate(size=10, z=8.0), 1.0)
    C = np.array([5.0, 5.0, 8.0])
    cs = ConstraintSpace(d_safe=5.0, h_limit=2.0)
    vp = generate_viewpoint(C, (0, 0, 1), 1.0)
    fixed = correct_viewpoint(vp, C, (0, 0, 1), 1.0, roof, cs)
    assert np.linalg.norm(roof.centroids - fixed.position, axis=1).min() >= 5.0
    np.testing.assert_allclose(fixed.direction, (C - fixed.position) / np.linalg.norm(C - fixed.position), atol=1e-9)


def test_correct_below_ground():
    wall = mesh_from([(0, 0, 0), (10, 0, 0), (10, 0, 10), (0, 0, 10)], [(0, 2, 1), (0, 3, 2)])
    C = np.array([5.0, 0.0, 1.0])
    N = np.array([0.0, -1.0, -0.3])
    cs = ConstraintSpace(d_safe=2.0, h_limit=2.0)
    vp = generate_viewpoint(C, N, 20.0)
    assert vp.position[2] < 2
    fixed = correct_viewpoint(vp, C, N, 20.0, wall, cs)
    assert fixed.position[2] >= 2.0
    assert is_feasible(fixed.position, wall, cs)


def test_correct_fails_when_every_retreat_is_infeasible():
    plate = shapes.flat_plate(size=10)
    C, N = np.array([5.0, 5.0, 0.0]), np.array([0.0, 0.0, 1.0])
    vp = generate_viewpoint(C, N, 10.0)
    with pytest.raises(CorrectionFailed):
        correct_viewpoint(vp, C, N, 10.0, plate, ConstraintSpace(h_limit=1000.0))


def test_retreat_steps_are_monotone():
    # a slab right above the target keeps pushing the viewpoint back along N
    mesh = mesh_from([(0, 0, 0), (4, 0, 0), (0, 4, 0), (0, 0, 13), (3, 0, 13), (0, 3, 13)],
                     [(0, 1, 2), (3, 4, 5)])
    C, N, _ = cluster_center_and_normal(mesh, [0])
    cs = ConstraintSpace(d_safe=3.0, h_limit=0.0, max_correction_iters=1)
    vp = generate_viewpoint(C, N, 14.0)
    fixed, retreats = correct_viewpoint(vp, C, N, 14.0, mesh, cs, with_stats=True)
    assert retreats >= 1
    assert is_feasible(fixed.position, mesh, cs)


# --------------------------------------------------------------------------- distance helpers

@given(vec3)
def test_point_triangle_distance_brute_force(P):
    corners = shapes.unit_cube().scaled(7).corners()
    got = point_triangle_distance(np.asarray(P), corners)
    # dense barycentric sampling bounds the exact distance from above
    u, v = np.meshgrid(np.linspace(0, 1, 41), np.linspace(0, 1, 41))
    keep = (u + v) <= 1
    u, v = u[keep], v[keep]
    for tri, d in zip(corners, got):
        pts = tri[0] + u[:, None] * (tri[1] - tri[0]) + v[:, None] * (tri[2] - tri[0])
        sampled = np.linalg.norm(pts - P, axis=1).min()
        assert d <= sampled + 1e-9
        assert d >= sampled - 7 * np.sqrt(2) / 40 - 1e-9


def test_exact_clearance_is_not_larger():
    house = shapes.house()
    P = np.array([12.0, -3.0, 4.0])
    assert clearance(P, house, exact=True) <= clearance(P, house)


# --------------------------------------------------------------------------- candidates

def test_candidates_satisfy_constraints():
    house = shapes.house()
    clusters = np.array_split(np.arange(house.n_triangles), 9)
    cs = ConstraintSpace()
    rep = generate_candidates(house, clusters, 28.5, cs, max_spread_deg=75)
    assert rep.candidates
    for cand in rep.candidates:
        P = cand.viewpoint.position
        assert P[2] >= cs.h_limit
        assert np.linalg.norm(house.centroids - P, axis=1).min() >= cs.d_safe
        aim = (cand.center - P) / np.linalg.norm(cand.center - P)
        np.testing.assert_allclose(cand.viewpoint.direction, aim, atol=1e-9)


def test_degenerate_cluster_is_split():
    cube = shapes.unit_cube().scaled(10)
    # whole cube: normals cancel
    rep = generate_candidates(cube, [np.arange(12)], 20.0, ConstraintSpace(d_safe=2.0, h_limit=-100))
    assert rep.splits >= 1
    assert len(rep.candidates) >= 2
