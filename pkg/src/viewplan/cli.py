"""Command-line entry point: ``viewplan plan|compare|solve|cluster``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import (ConfigError, EmptyMesh, InstanceInfeasible, IoError, NoProgress, ParseError,
                     SamplingStarved, SubdivisionOverflow, TooLarge)
from .mesh import load_mesh, subdivide, write_ply
from .planner import compare_methods, export_visualization, plan
from .solver import GaParams, ScpInstance, solve, write_history_csv
from .spectral import ClusterParams, SubsetTooLarge, cluster_mesh
from .visibility import coverage_stats, read_bitmatrix

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("viewplan")


def _load(path, cfg=None, mesh_opts=None):
    mesh_opts = mesh_opts or {}
    mesh, report = load_mesh(path, weld_tol=mesh_opts.get("weld_tol", 1e-6),
                             flip_normals=mesh_opts.get("flip_normals", False), with_report=True)
    log.info("loaded %s: %d triangles (%s)", path, mesh.n_triangles, report)
    if cfg is not None and cfg.max_area is not None:
        mesh = subdivide(mesh, cfg.max_area)
        log.info("subdivided to %d triangles", mesh.n_triangles)
    return mesh


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _out_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {path}: {exc}") from exc
    return Path(path)


def _coverage_csv(mesh, report):
    counts = np.zeros(mesh.n_triangles, dtype=int)
    if report.matrix is not None and report.selected:
        counts, _ = coverage_stats(report.matrix.bits[report.selected], np.ones(len(report.selected)))
    uncoverable = set(report.uncoverable)
    lines = ["triangle,cover_count,uncoverable"]
    lines += [f"{j},{int(c)},{int(j in uncoverable)}" for j, c in enumerate(counts)]
    return "\n".join(lines) + "\n"


def _config_from(args, **extra):
    overrides = {"seed": getattr(args, "seed", None), "workers": getattr(args, "workers", None)}
    overrides.update(extra)
    return load_config(args.config, overrides)


def cmd_plan(args):
    cfg, mesh_opts = _config_from(args)
    mesh = _load(args.mesh, cfg, mesh_opts)
    report = plan(mesh, cfg)
    out = _out_dir(args.out_dir)
    _write_text(out / "report.json", report.to_json() + "\n")
    _write_text(out / "viewpoints.json",
                json.dumps([vp.to_dict() for vp in report.viewpoints], indent=2) + "\n")
    _write_text(out / "coverage.csv", _coverage_csv(mesh, report))
    _write_text(out / "timing.json", json.dumps(report.timing, indent=2, sort_keys=True) + "\n")
    export_visualization(mesh, report, out / "visualization.ply", camera=cfg.camera)
    print(f"{len(report.viewpoints)} viewpoints from {report.candidate_count} candidates, "
          f"coverage {report.coverage_ratio:.4f} of coverable "
          f"({len(report.uncoverable)} uncoverable), {report.outer_iterations} rounds")
    return EXIT_OK


def cmd_compare(args):
    cfg, mesh_opts = _config_from(args)
    mesh = _load(args.mesh, cfg, mesh_opts)
    cmp = compare_methods(mesh, cfg, repeats=args.repeats, keep_reports=True)
    out = _out_dir(args.out_dir)
    _write_text(out / "comparison.csv", cmp.to_csv())
    _write_text(out / "comparison_runs.csv", cmp.runs_csv())
    _write_text(out / "comparison_curve.csv", cmp.curve_csv())
    rows = cmp.timing_summary()
    _write_text(out / "comparison_timing.csv",
                "method,wall_time_mean,wall_time_std\n"
                + "".join(f"{r['method']},{r['wall_time_mean']:.6f},{r['wall_time_std']:.6f}\n" for r in rows))
    runs = _out_dir(out / "runs")
    for r in cmp.runs:
        _write_text(runs / f"{r.method}_seed{r.seed}_viewpoints.json",
                    json.dumps([vp.to_dict() for vp in r.report.viewpoints], indent=2) + "\n")
    for row in cmp.summary():
        print(f"{row['method']:>9}: selected {row['selected_mean']:.2f} +- {row['selected_std']:.2f}, "
              f"coverage {row['coverage_mean']:.4f}")
    return EXIT_OK


def cmd_solve(args):
    try:
        params = GaParams(delta=args.delta, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    A = read_bitmatrix(args.matrix)
    inst = ScpInstance(A, args.delta)
    result = solve(inst, args.algo, params)
    if args.history:
        write_history_csv(args.history, result.history)
    print(json.dumps({
        "algo": args.algo,
        "m": inst.m,
        "n": inst.n,
        "size": result.size,
        "fitness": result.best_fitness,
        "iterations_to_best": result.iterations_to_best,
        "selected": [int(i) for i in np.flatnonzero(result.best)],
    }))
    return EXIT_OK


def cmd_cluster(args):
    try:
        params = ClusterParams(k=args.k, theta=args.theta, sigma=args.sigma, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mesh = _load(args.mesh)
    if args.k > mesh.n_triangles:
        raise ConfigError(f"k={args.k} exceeds the {mesh.n_triangles} triangles of the mesh")
    assignment = cluster_mesh(mesh, np.arange(mesh.n_triangles), params)
    rng = np.random.default_rng(args.seed)
    palette = rng.integers(40, 256, size=(assignment.k, 3))
    write_ply(args.out, mesh, face_colors=palette[assignment.labels],
              face_props={"cluster": assignment.labels})
    sizes = [len(m) for m in assignment.members]
    print(f"{assignment.k} clusters, sizes {sizes}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="viewplan", description="View planning for surface inspection.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="plan viewpoints for a mesh")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("compare", help="proposed pipeline vs random sampling")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--config")
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("solve", help="solve a set-cover instance from a bit-matrix file")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--delta", type=float, default=1.0)
    sp.add_argument("--algo", choices=["gahh", "ga", "greedy", "exact"], default="gahh")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--history", help="write generation,best_fitness,best_size CSV here")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("cluster", help="spectral clustering to a coloured PLY")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--theta", type=float, default=0.5)
    sp.add_argument("--sigma", type=float, default=0.35)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="clusters.ply")
    sp.set_defaults(func=cmd_cluster)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "repeats", 1) < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, TooLarge, SubsetTooLarge, SubdivisionOverflow) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InstanceInfeasible, NoProgress, SamplingStarved) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (IoError, ParseError, EmptyMesh) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
