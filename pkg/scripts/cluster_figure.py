"""Write the house clustered at the auto-k the planner would pick, one colour per cluster."""
import argparse
import sys
from pathlib import Path

import numpy as np

from viewplan import shapes
from viewplan.mesh import write_ply
from viewplan.spectral import ClusterParams, auto_k, cluster_mesh


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mesh", choices=["house", "l_tower"], default="house")
    ap.add_argument("--fod", type=float, default=30.0)
    ap.add_argument("--fov", type=float, default=80.0)
    ap.add_argument("--k", type=int, help="override the automatic cluster count")
    ap.add_argument("--theta", type=float, default=0.5)
    ap.add_argument("--sigma", type=float, default=0.35)
    ap.add_argument("--out", type=Path, default=Path("results/clusters.ply"))
    args = ap.parse_args(argv)

    mesh = getattr(shapes, args.mesh)()
    k = args.k or auto_k(float(mesh.areas.sum()), args.fod, args.fov)
    a = cluster_mesh(mesh, np.arange(mesh.n_triangles),
                     ClusterParams(k=min(k, mesh.n_triangles), theta=args.theta, sigma=args.sigma))
    palette = np.random.default_rng(0).integers(40, 256, size=(a.k, 3))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_ply(args.out, mesh, face_colors=palette[a.labels], face_props={"cluster": a.labels})
    print(f"{mesh.n_triangles} triangles in {a.k} clusters -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
