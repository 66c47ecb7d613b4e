"""End-to-end view planning and the random-sampling comparison.

``plan`` runs the generate-and-test loop: cluster the still-uncovered
triangles, place and correct one viewpoint per cluster, grow the
visibility matrix with the new rows, and once the candidate pool can reach
the coverage target, pick the subset with the set-cover solver.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import InstanceInfeasible, NoProgress, SamplingStarved
from .mesh import bounding_box, write_ply
from .solver import GaParams, ScpInstance, solve
from .spectral import ClusterParams, auto_k, cluster_mesh
from .viewgen import ConstraintSpace, Viewpoint, generate_candidates
from .visibility import Bvh, CameraModel, VisibilityMatrix, coverage_stats, visibility_matrix

log = logging.getLogger(__name__)

SOLVER_NAMES = ("gahh", "ga", "greedy", "exact")


@dataclass(frozen=True)
class ClusterConfig:
    theta: float = 0.5
    sigma: float = 0.35
    k: int | None = None  # None: one cluster per expected camera footprint
    packing: float = 0.5
    kmeans_max_iter: int = 100
    eigenvector_order: str = "smallest"

    def __post_init__(self):
        if self.k is not None and (isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1):
            raise ValueError(f"k must be a positive integer or unset, got {self.k!r}")
        if not self.packing > 0:
            raise ValueError("packing must be positive")
        # theta, sigma and eigenvector_order are checked by ClusterParams
        ClusterParams(theta=self.theta, sigma=self.sigma, eigenvector_order=self.eigenvector_order)


@dataclass(frozen=True)
class PlanConfig:
    camera: CameraModel = field(default_factory=CameraModel)
    constraints: ConstraintSpace = field(default_factory=ConstraintSpace)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    ga: GaParams = field(default_factory=GaParams)
    delta: float = 1.0
    max_outer_iters: int = 10
    offset_factor: float = 0.95
    max_area: float | None = None
    seed: int = 0
    patience: int = 2
    split_spread: bool = True  # split clusters whose normals stray beyond beta_max
    solver: str = "gahh"
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.offset_factor <= 1.0:
            raise ValueError("offset_factor must lie in (0, 1]")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.solver not in SOLVER_NAMES:
            raise ValueError(f"solver must be one of {SOLVER_NAMES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_area is not None and not self.max_area > 0:
            raise ValueError("max_area must be positive")

    @property
    def offset(self):
        return self.offset_factor * self.camera.fod

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass
class PlanReport:
    viewpoints: list
    coverage_ratio: float  # over the coverable target
    coverage_ratio_total: float  # over every triangle
    uncoverable: list
    candidate_count: int
    outer_iterations: int
    timing: dict
    solver_history: list
    iterations_to_best: int = 0
    selected: list = field(default_factory=list)  # indices into the candidate pool
    candidates: list = field(default_factory=list)
    curve: list = field(default_factory=list)  # (candidate count, uncovered ratio) per round
    matrix: VisibilityMatrix | None = None

    def to_json(self):
        """Deterministic JSON (wall-clock timing is excluded)."""
        body = {
            "selected_count": len(self.viewpoints),
            "coverage_ratio": self.coverage_ratio,
            "coverage_ratio_total": self.coverage_ratio_total,
            "candidate_count": self.candidate_count,
            "outer_iterations": self.outer_iterations,
            "iterations_to_best": self.iterations_to_best,
            "uncoverable": [int(i) for i in self.uncoverable],
            "selected": [int(i) for i in self.selected],
            "viewpoints": [vp.to_dict() for vp in self.viewpoints],
            "curve": [[int(c), float(u)] for c, u in self.curve],
            "solver_history": [[int(g), float(f), int(s)] for g, f, s in self.solver_history],
        }
        return json.dumps(body, indent=2, sort_keys=True)


def check_constraints(viewpoints, mesh, cs):
    """Independent re-check of clearance and altitude; returns the offending indices."""
    if not viewpoints:
        return []
    pos = np.array([vp.position for vp in viewpoints])
    nearest, _ = cKDTree(mesh.centroids).query(pos)
    bad = (nearest < cs.d_safe) | (pos[:, 2] < cs.h_limit)
    return [int(i) for i in np.flatnonzero(bad)]


def _seeds(seed, count):
    return [int(x) for x in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]


def _cluster_k(cfg, mesh, subset, round_no):
    cc = cfg.cluster
    if cc.k is not None:
        k = cc.k
    else:
        area = float(mesh.areas[subset].sum())
        k = auto_k(area, cfg.camera.fod, cfg.camera.fov, cc.packing, cfg.offset_factor)
        # re-clustering rounds refine: scattered leftovers need more, smaller clusters
        k *= 2 ** max(0, round_no - 2)
    return int(min(max(k, 1), len(subset)))


def _solve_target(A_bits, target, cfg, seed):
    inst = ScpInstance(A_bits[:, target], cfg.delta)
    params = replace(cfg.ga, delta=cfg.delta, seed=seed)
    return solve(inst, cfg.solver, params)


def plan(mesh, cfg=None):
    cfg = cfg or PlanConfig()
    cam, cs = cfg.camera, cfg.constraints
    n = mesh.n_triangles
    timing = {"cluster": 0.0, "viewgen": 0.0, "visibility": 0.0, "solve": 0.0}
    bvh = Bvh.from_mesh(mesh)
    seeds = _seeds(cfg.seed, cfg.max_outer_iters + 1)

    pool = []
    rows = np.zeros((0, n), dtype=bool)
    seen = np.zeros(n, dtype=bool)
    strikes = np.zeros(n, dtype=np.int64)
    unreachable = np.zeros(n, dtype=bool)
    curve = []
    rounds = 0

    for rounds in range(1, cfg.max_outer_iters + 1):
        target = ~unreachable
        need = math.ceil(cfg.delta * target.sum() - 1e-9)
        if (seen & target).sum() >= need and rounds > 1:
            rounds -= 1
            break
        subset = np.arange(n) if rounds == 1 else np.flatnonzero(target & ~seen)
        if len(subset) == 0:
            rounds -= 1
            break

        t0 = time.perf_counter()
        k = _cluster_k(cfg, mesh, subset, rounds)
        params = ClusterParams(k=k, theta=cfg.cluster.theta, sigma=cfg.cluster.sigma,
                               kmeans_max_iter=cfg.cluster.kmeans_max_iter, seed=seeds[rounds - 1],
                               eigenvector_order=cfg.cluster.eigenvector_order)
        clusters = cluster_mesh(mesh, subset, params)
        t1 = time.perf_counter()
        gen = generate_candidates(mesh, clusters.members, cfg.offset, cs,
                                  seed=seeds[rounds - 1], first_index=len(pool),
                                  max_spread_deg=cam.beta_max if cfg.split_spread else None)
        t2 = time.perf_counter()
        new_vps = [c.viewpoint for c in gen.candidates]
        if new_vps:
            new_rows = visibility_matrix(new_vps, mesh, cam, bvh=bvh, workers=cfg.workers).bits
            rows = np.vstack([rows, new_rows])
            seen |= new_rows.any(axis=0)
            pool.extend(gen.candidates)
        t3 = time.perf_counter()
        timing["cluster"] += t1 - t0
        timing["viewgen"] += t2 - t1
        timing["visibility"] += t3 - t2
        log.info("round %d: %d triangles in %d clusters -> %d candidates (%d failed), seen %d/%d",
                 rounds, len(subset), k, len(new_vps), gen.failed, int(seen.sum()), n)

        if not pool:
            raise NoProgress(f"round {rounds} produced no feasible candidate for {len(subset)} triangles")
        if rounds > 1:
            missed = subset[~seen[subset]]
            strikes[missed] += cfg.patience if not new_vps else 1
            unreachable |= strikes >= cfg.patience
        curve.append((len(pool), float(1.0 - seen.sum() / n)))

    # whatever the pool still cannot see is unreachable for this configuration
    target_mask = ~unreachable & seen
    dropped = np.flatnonzero(~unreachable & ~seen)
    if len(dropped):
        log.warning("%d triangles unseen after %d rounds; treated as uncoverable", len(dropped), rounds)
    uncoverable = np.flatnonzero(~target_mask)
    if len(uncoverable):
        log.warning("%d of %d triangles are uncoverable under the constraints", len(uncoverable), n)
    target = np.flatnonzero(target_mask)
    if len(target) == 0:
        raise NoProgress("no triangle is visible from any feasible candidate")

    t0 = time.perf_counter()
    result = _solve_target(rows, target, cfg, seeds[-1])
    timing["solve"] = time.perf_counter() - t0

    selected = np.flatnonzero(result.best)
    chosen = [pool[i].viewpoint for i in selected]
    bad = check_constraints(chosen, mesh, cs)
    if bad:
        raise AssertionError(f"viewpoints {bad} violate the clearance/altitude constraints")
    c, n_cover_all = coverage_stats(rows, result.best)
    covered_target = int(np.count_nonzero(c[target]))
    return PlanReport(
        viewpoints=chosen,
        coverage_ratio=covered_target / len(target),
        coverage_ratio_total=n_cover_all / n,
        uncoverable=[int(i) for i in uncoverable],
        candidate_count=len(pool),
        outer_iterations=rounds,
        timing=timing,
        solver_history=result.history,
        iterations_to_best=result.iterations_to_best,
        selected=[int(i) for i in selected],
        candidates=pool,
        curve=curve,
        matrix=VisibilityMatrix(rows),
    )


# --------------------------------------------------------------------------- random baseline

def random_sampling_baseline(mesh, cfg, candidate_budget, rng=None):
    """Uniform positions in the FOD-inflated bounding box, kept if within [d_safe, fod] of the
    nearest centroid and above h_limit; each aims at its nearest centroid."""
    if candidate_budget < 1:
        raise ValueError("candidate_budget must be >= 1")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    cam, cs = cfg.camera, cfg.constraints
    box = bounding_box(mesh).inflated(cam.fod)
    tree = cKDTree(mesh.centroids)
    out = []
    attempts, cap = 0, 100 * candidate_budget
    while len(out) < candidate_budget:
        if attempts >= cap:
            raise SamplingStarved(
                f"{len(out)} of {candidate_budget} candidates after {attempts} samples"
            )
        batch = min(cap - attempts, candidate_budget)
        P = rng.uniform(box.min, box.max, size=(batch, 3))
        attempts += batch
        dist, idx = tree.query(P)
        ok = (dist >= cs.d_safe) & (dist <= cam.fod) & (P[:, 2] >= cs.h_limit)
        for p, j in zip(P[ok], idx[ok]):
            if len(out) == candidate_budget:
                break
            out.append(Viewpoint(p, mesh.centroids[j] - p))
    return out


def plan_random(mesh, cfg, candidate_budget, target=None, rng=None):
    """Iterative random sampling: add ``candidate_budget`` samples per round until the pool
    sees the target, then run the same solver."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = mesh.n_triangles
    target_mask = np.ones(n, dtype=bool) if target is None else np.isin(np.arange(n), target)
    bvh = Bvh.from_mesh(mesh)
    pool, rows = [], np.zeros((0, n), dtype=bool)
    curve = []
    rounds = 0
    need = math.ceil(cfg.delta * target_mask.sum() - 1e-9)
    t0 = time.perf_counter()
    for rounds in range(1, cfg.max_outer_iters + 1):
        vps = random_sampling_baseline(mesh, cfg, candidate_budget, rng)
        rows = np.vstack([rows, visibility_matrix(vps, mesh, cfg.camera, bvh=bvh, workers=cfg.workers).bits])
        pool.extend(vps)
        seen = rows.any(axis=0)
        curve.append((len(pool), float(1.0 - seen.sum() / n)))
        if (seen & target_mask).sum() >= need:
            break
    t_gen = time.perf_counter() - t0
    seen = rows.any(axis=0)
    final_target = np.flatnonzero(target_mask & seen)
    uncoverable = np.flatnonzero(~(target_mask & seen))
    t0 = time.perf_counter()
    result = _solve_target(rows, final_target, cfg, int(rng.integers(2**63)))
    t_solve = time.perf_counter() - t0
    selected = np.flatnonzero(result.best)
    c, n_cover_all = coverage_stats(rows, result.best)
    return PlanReport(
        viewpoints=[pool[i] for i in selected],
        coverage_ratio=int(np.count_nonzero(c[final_target])) / max(1, len(final_target)),
        coverage_ratio_total=n_cover_all / n,
        uncoverable=[int(i) for i in uncoverable],
        candidate_count=len(pool),
        outer_iterations=rounds,
        timing={"sampling": t_gen, "solve": t_solve},
        solver_history=result.history,
        iterations_to_best=result.iterations_to_best,
        selected=[int(i) for i in selected],
        candidates=pool,
        curve=curve,
        matrix=VisibilityMatrix(rows),
    )


# --------------------------------------------------------------------------- comparison

@dataclass
class RunRecord:
    method: str
    seed: int
    selected: int
    coverage: float
    coverage_total: float
    candidates: int
    uncoverable: int
    rounds: int
    wall_time: float
    curve: list
    report: PlanReport | None = None


@dataclass
class Comparison:
    runs: list

    def methods(self):
        return sorted({r.method for r in self.runs}, key=["proposed", "baseline"].index)

    def summary(self):
        rows = []
        for method in self.methods():
            rs = [r for r in self.runs if r.method == method]
            row = {"method": method, "runs": len(rs)}
            for key in ("selected", "coverage", "coverage_total", "candidates", "uncoverable"):
                vals = np.array([getattr(r, key) for r in rs], dtype=float)
                row[f"{key}_mean"] = float(vals.mean())
                row[f"{key}_std"] = float(vals.std())
            rows.append(row)
        return rows

    def timing_summary(self):
        out = []
        for method in self.methods():
            t = np.array([r.wall_time for r in self.runs if r.method == method])
            out.append({"method": method, "wall_time_mean": float(t.mean()), "wall_time_std": float(t.std())})
        return out

    def to_csv(self):
        rows = self.summary()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()

    def runs_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "seed", "selected", "coverage", "coverage_total", "candidates",
                    "uncoverable", "rounds"])
        for r in self.runs:
            w.writerow([r.method, r.seed, r.selected, repr(r.coverage), repr(r.coverage_total),
                        r.candidates, r.uncoverable, r.rounds])
        return buf.getvalue()

    def curve_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "seed", "candidates", "uncovered_ratio"])
        for r in self.runs:
            for count, u in r.curve:
                w.writerow([r.method, r.seed, count, repr(u)])
        return buf.getvalue()


def _record(method, seed, rep, wall):
    return RunRecord(method, seed, len(rep.viewpoints), rep.coverage_ratio, rep.coverage_ratio_total,
                     rep.candidate_count, len(rep.uncoverable), rep.outer_iterations, wall, rep.curve, rep)


def compare_methods(mesh, cfg, repeats=10, seeds=None, keep_reports=False):
    """Proposed pipeline vs iterative random sampling with a matched per-round budget.

    The baseline's first round gets as many candidates as the proposed pool
    ended with, and targets the triangles the proposed method found coverable.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    seeds = list(range(cfg.seed, cfg.seed + repeats)) if seeds is None else list(seeds)
    runs = []
    for seed in seeds:
        run_cfg = cfg.with_seed(seed)
        t0 = time.perf_counter()
        prop = plan(mesh, run_cfg)
        runs.append(_record("proposed", seed, prop, time.perf_counter() - t0))
        target = np.setdiff1d(np.arange(mesh.n_triangles), prop.uncoverable)
        t0 = time.perf_counter()
        base = plan_random(mesh, run_cfg, prop.candidate_count, target,
                           rng=np.random.default_rng([seed, 1]))
        runs.append(_record("baseline", seed, base, time.perf_counter() - t0))
        if not keep_reports:
            runs[-1].report = runs[-2].report = None
    return Comparison(runs)


# --------------------------------------------------------------------------- export

def face_colors(counts):
    """0 -> red, 1 -> green, >= 2 -> blue getting darker with the count."""
    counts = np.asarray(counts)
    col = np.zeros((len(counts), 3), dtype=int)
    col[counts == 0] = (255, 0, 0)
    col[counts == 1] = (0, 200, 0)
    many = counts >= 2
    shade = np.clip(255 - 30 * (counts[many] - 2), 80, 255)
    col[many] = np.stack([np.zeros_like(shade), np.zeros_like(shade), shade], axis=1)
    return col


def export_visualization(mesh, report, path, stub_length=None, camera=None):
    """PLY with faces coloured by cover count, viewpoints as vertices, direction stubs as edges."""
    n = mesh.n_triangles
    if report.matrix is not None and report.selected:
        counts, _ = coverage_stats(report.matrix.bits[report.selected], np.ones(len(report.selected)))
    elif report.viewpoints:
        counts, _ = coverage_stats(visibility_matrix(report.viewpoints, mesh, camera or CameraModel()),
                                   np.ones(len(report.viewpoints)))
    else:
        counts = np.zeros(n, dtype=int)
    length = stub_length or 0.05 * float(np.linalg.norm(bounding_box(mesh).size))
    extra, edges = [], []
    base = len(mesh.vertices)
    for i, vp in enumerate(report.viewpoints):
        extra += [vp.position, vp.position + length * vp.direction]
        edges.append((base + 2 * i, base + 2 * i + 1))
    colors = [(255, 255, 0), (255, 128, 0)] * len(report.viewpoints)
    write_ply(path, mesh, face_colors=face_colors(counts), face_props={"cover": counts},
              extra_vertices=np.array(extra).reshape(-1, 3), extra_colors=colors,
              edges=np.array(edges, dtype=int).reshape(-1, 2))


def config_dict(cfg):
    return asdict(cfg)
