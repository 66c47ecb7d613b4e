import json

import numpy as np
import pytest

from viewplan import shapes
from viewplan.errors import NoProgress, SamplingStarved
from viewplan.mesh import load_mesh, subdivide
from viewplan.planner import (ClusterConfig, PlanConfig, PlanReport, check_constraints,
                              compare_methods, export_visualization, face_colors, plan,
                              random_sampling_baseline)
from viewplan.viewgen import ConstraintSpace
from viewplan.visibility import CameraModel, coverage_stats


def read_ply_faces(path):
    """Face colours and the count of edge records from an ASCII PLY written by export_visualization."""
    lines = path.read_text().splitlines()
    end = lines.index("end_header")
    header = lines[:end]
    nv = int(next(h for h in header if h.startswith("element vertex")).split()[-1])
    nf = int(next(h for h in header if h.startswith("element face")).split()[-1])
    edge_lines = [h for h in header if h.startswith("element edge")]
    ne = int(edge_lines[0].split()[-1]) if edge_lines else 0
    faces = [list(map(int, ln.split())) for ln in lines[end + 1 + nv:end + 1 + nv + nf]]
    colors = np.array([f[4:7] for f in faces])
    return colors, ne


def covered_counts(report, n):
    if not report.selected:
        return np.zeros(n, int)
    return coverage_stats(report.matrix.bits[report.selected], np.ones(len(report.selected)))[0]


# --------------------------------------------------------------------------- plan

def test_flat_floor_needs_one_viewpoint():
    floor = subdivide(shapes.flat_plate(size=10), 0.5)
    rep = plan(floor, PlanConfig(camera=CameraModel(fod=30, fov=80)))
    assert len(rep.viewpoints) == 1
    assert rep.coverage_ratio == 1.0 and rep.coverage_ratio_total == 1.0


def test_closed_cube_every_reachable_face_seen():
    cube = shapes.unit_cube()
    rep = plan(cube, PlanConfig())
    assert rep.coverage_ratio == 1.0
    counts = covered_counts(rep, cube.n_triangles)
    # the bottom face cannot be seen from above the altitude limit
    bottom = set(np.flatnonzero(cube.normals[:, 2] < -0.5).tolist())
    assert set(rep.uncoverable) == bottom
    for j in set(range(12)) - bottom:
        assert counts[j] >= 1
        ok = False
        for vp in rep.viewpoints:
            ray = vp.position - cube.centroids[j]
            ok |= np.degrees(np.arccos(ray @ cube.normals[j] / np.linalg.norm(ray))) <= 75
        assert ok


def test_convex_mesh_fully_reachable_is_fully_covered():
    cube = shapes.cube(10.0, origin=(0, 0, 50))
    rep = plan(cube, PlanConfig(constraints=ConstraintSpace(h_limit=0.0)))
    assert rep.uncoverable == []
    assert rep.coverage_ratio == 1.0 and rep.coverage_ratio_total == 1.0


def test_sealed_cavity_is_uncoverable():
    block = shapes.hollow_block(size=10, cavity=4)
    cavity = np.flatnonzero(np.all((block.centroids > 2.5) & (block.centroids < 7.5), axis=1))
    cfg = PlanConfig(max_outer_iters=6)
    rep = plan(block, cfg)
    assert set(cavity.tolist()) <= set(rep.uncoverable)
    assert rep.coverage_ratio == 1.0
    assert rep.outer_iterations <= cfg.max_outer_iters


def test_no_feasible_candidate_raises():
    with pytest.raises(NoProgress):
        plan(shapes.unit_cube(), PlanConfig(constraints=ConstraintSpace(h_limit=1000.0)))


def test_pool_grows_monotonically_and_constraints_hold():
    house = shapes.house()
    cfg = PlanConfig()
    rep = plan(house, cfg)
    counts = [c for c, _ in rep.curve]
    assert counts == sorted(counts)
    assert rep.matrix.m == rep.candidate_count == len(rep.candidates)
    assert check_constraints(rep.viewpoints, house, cfg.constraints) == []
    assert not set(rep.uncoverable) & set(np.flatnonzero(covered_counts(rep, house.n_triangles)).tolist())


def test_plan_is_reproducible_across_thread_counts():
    house = shapes.house()
    a = plan(house, PlanConfig(seed=5)).to_json()
    b = plan(house, PlanConfig(seed=5, workers=4)).to_json()
    assert a == b
    assert json.loads(a)["selected_count"] >= 1


def test_partial_target():
    house = shapes.house()
    rep = plan(house, PlanConfig(delta=0.8))
    assert rep.coverage_ratio >= 0.8


def test_config_validation():
    for bad in ({"offset_factor": 0.0}, {"offset_factor": 1.5}, {"delta": 0.0}, {"max_outer_iters": 0},
                {"solver": "anneal"}, {"workers": 0}):
        with pytest.raises(ValueError):
            PlanConfig(**bad)
    with pytest.raises(ValueError):
        ClusterConfig(k=0)


# --------------------------------------------------------------------------- random baseline

def test_baseline_floor_candidates_respect_constraints():
    floor = subdivide(shapes.flat_plate(size=10), 0.5)
    cfg = PlanConfig()
    vps = random_sampling_baseline(floor, cfg, 50, np.random.default_rng(0))
    assert len(vps) == 50
    for vp in vps:
        d = np.linalg.norm(floor.centroids - vp.position, axis=1).min()
        assert cfg.constraints.d_safe <= d <= cfg.camera.fod
        assert vp.position[2] >= cfg.constraints.h_limit


def test_baseline_aims_at_nearest_centroid():
    cube = shapes.cube(4.0, origin=(0, 0, 5))
    (vp,) = random_sampling_baseline(cube, PlanConfig(), 1, np.random.default_rng(1))
    j = np.argmin(np.linalg.norm(cube.centroids - vp.position, axis=1))
    to = cube.centroids[j] - vp.position
    assert vp.direction @ (to / np.linalg.norm(to)) == pytest.approx(1.0, abs=1e-9)


def test_baseline_starves_when_shell_is_empty():
    cfg = PlanConfig(camera=CameraModel(fod=10), constraints=ConstraintSpace(d_safe=20))
    with pytest.raises(SamplingStarved):
        random_sampling_baseline(shapes.unit_cube(), cfg, 5, np.random.default_rng(0))


# --------------------------------------------------------------------------- comparison

def test_compare_single_repeat_has_zero_std():
    cmp = compare_methods(shapes.house(), PlanConfig(), repeats=1)
    rows = cmp.summary()
    assert [r["method"] for r in rows] == ["proposed", "baseline"]
    assert all(r["selected_std"] == 0.0 for r in rows)


def test_compare_csv_is_byte_identical():
    house = shapes.house()
    a = compare_methods(house, PlanConfig(), repeats=2)
    b = compare_methods(house, PlanConfig(), repeats=2)
    assert a.to_csv() == b.to_csv()
    assert a.runs_csv() == b.runs_csv() and a.curve_csv() == b.curve_csv()


@pytest.mark.slow
def test_compare_house_direction():
    cmp = compare_methods(shapes.house(), PlanConfig(), repeats=10)
    prop, base = cmp.summary()
    assert len(cmp.to_csv().splitlines()) == 3
    assert prop["selected_mean"] <= base["selected_mean"]


# --------------------------------------------------------------------------- export

def test_face_colors():
    cols = face_colors(np.array([0, 1, 2, 5]))
    assert cols[0].tolist() == [255, 0, 0]
    assert cols[1].tolist() == [0, 200, 0]
    assert cols[2][2] > cols[3][2] > 0 and cols[2][0] == 0


def test_export_full_coverage_has_no_red(tmp_path):
    floor = subdivide(shapes.flat_plate(size=10), 0.5)
    rep = plan(floor, PlanConfig())
    path = tmp_path / "vis.ply"
    export_visualization(floor, rep, path)
    colors, edges = read_ply_faces(path)
    assert not np.any(np.all(colors == [255, 0, 0], axis=1))
    assert edges == len(rep.viewpoints)
    # the exported file still loads as a mesh
    assert load_mesh(path).n_triangles == floor.n_triangles


def test_export_stub_count(tmp_path):
    house = shapes.house()
    rep = plan(house, PlanConfig())
    rep5 = PlanReport(viewpoints=rep.candidates and [c.viewpoint for c in rep.candidates[:5]],
                      coverage_ratio=0.0, coverage_ratio_total=0.0, uncoverable=[], candidate_count=5,
                      outer_iterations=1, timing={}, solver_history=[], selected=list(range(5)),
                      matrix=type(rep.matrix)(rep.matrix.bits[:5]))
    path = tmp_path / "vis.ply"
    export_visualization(house, rep5, path)
    assert read_ply_faces(path)[1] == 5


def test_export_empty_selection_all_red(tmp_path):
    cube = shapes.unit_cube()
    rep = PlanReport(viewpoints=[], coverage_ratio=0.0, coverage_ratio_total=0.0, uncoverable=[],
                     candidate_count=0, outer_iterations=0, timing={}, solver_history=[])
    path = tmp_path / "vis.ply"
    export_visualization(cube, rep, path)
    colors, edges = read_ply_faces(path)
    assert np.all(colors == [255, 0, 0]) and edges == 0
