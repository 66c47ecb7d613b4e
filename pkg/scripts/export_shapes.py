"""Dump the synthetic meshes to PLY so the CLI can be pointed at them."""
import argparse
import sys
from pathlib import Path

from viewplan import shapes
from viewplan.mesh import write_ply

BUILDERS = {
    "house": shapes.house,
    "l_tower": shapes.l_tower,
    "open_box": shapes.open_box,
    "hollow_block": shapes.hollow_block,
    "plate": lambda: shapes.flat_plate(size=20.0, max_area=4.0),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("meshes"))
    args = ap.parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        mesh = build()
        write_ply(args.out_dir / f"{name}.ply", mesh)
        print(f"{name}: {mesh.n_triangles} triangles")
    return 0


if __name__ == "__main__":
    sys.exit(main())
