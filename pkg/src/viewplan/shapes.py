"""Synthetic test geometry: plate, open box, cube, gabled house, L-shaped tower, hollow block.

Outward-facing winding throughout. Buildings have no floor face: they
stand on the ground plane z = 0.
"""
import numpy as np

from .mesh import build_mesh, subdivide


class _Builder:
    def __init__(self):
        self.verts = []
        self.tris = []

    def _add(self, pts):
        base = len(self.verts)
        self.verts.extend(np.asarray(p, dtype=float) for p in pts)
        return base

    def tri(self, a, b, c):
        base = self._add([a, b, c])
        self.tris.append([base, base + 1, base + 2])

    def quad(self, a, b, c, d):
        """Counter-clockwise (seen from outside) quad a-b-c-d."""
        base = self._add([a, b, c, d])
        self.tris += [[base, base + 1, base + 2], [base, base + 2, base + 3]]

    def box(self, lo, hi, faces="xXyYzZ", inward=False):
        (x0, y0, z0), (x1, y1, z1) = lo, hi
        quads = {
            "x": [(x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)],
            "X": [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
            "y": [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
            "Y": [(x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)],
            "z": [(x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)],
            "Z": [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
        }
        for f in faces:
            q = quads[f]
            self.quad(*(q[::-1] if inward else q))

    def mesh(self, max_area=None):
        m, _ = build_mesh(np.array(self.verts), np.array(self.tris))
        return m if max_area is None else subdivide(m, max_area)


def flat_plate(size=10.0, z=0.0, max_area=None):
    b = _Builder()
    s = float(size)
    b.quad((0, 0, z), (s, 0, z), (s, s, z), (0, s, z))
    return b.mesh(max_area)


def unit_cube(max_area=None):
    b = _Builder()
    b.box((0, 0, 0), (1, 1, 1))
    return b.mesh(max_area)


def cube(size=1.0, origin=(0.0, 0.0, 0.0), max_area=None):
    b = _Builder()
    lo = np.asarray(origin, dtype=float)
    b.box(lo, lo + size)
    return b.mesh(max_area)


def open_box(size=(10.0, 10.0, 5.0), max_area=None):
    """Box with no floor and no lid, walls facing outward."""
    b = _Builder()
    b.box((0, 0, 0), size, faces="xXyY")
    return b.mesh(max_area)


def house(width=24.0, depth=16.0, wall_height=8.0, ridge_height=14.0, max_area=8.0):
    """Gabled house: four walls plus a two-slope roof ridged along x."""
    w, d, h, r = width, depth, wall_height, ridge_height
    b = _Builder()
    b.box((0, 0, 0), (w, d, h), faces="xXyY")
    ym = d / 2.0
    # roof slopes
    b.quad((0, 0, h), (w, 0, h), (w, ym, r), (0, ym, r))
    b.quad((0, d, h), (0, ym, r), (w, ym, r), (w, d, h))
    # gables
    b.tri((0, 0, h), (0, ym, r), (0, d, h))
    b.tri((w, 0, h), (w, d, h), (w, ym, r))
    return b.mesh(max_area)


def l_tower(arm=24.0, thickness=10.0, height=30.0, max_area=12.0):
    """L-shaped tower: footprint is the union of [0,arm]x[0,t] and [0,t]x[0,arm]."""
    a, t, h = arm, thickness, height
    b = _Builder()
    outline = [(0, 0), (a, 0), (a, t), (t, t), (t, a), (0, a)]  # counter-clockwise
    for (x0, y0), (x1, y1) in zip(outline, outline[1:] + outline[:1]):
        b.quad((x0, y0, 0), (x1, y1, 0), (x1, y1, h), (x0, y0, h))
    b.quad((0, 0, h), (a, 0, h), (a, t, h), (0, t, h))
    b.quad((0, t, h), (t, t, h), (t, a, h), (0, a, h))
    return b.mesh(max_area)


def hollow_block(size=10.0, cavity=4.0, max_area=None):
    """Closed block on the ground enclosing a sealed cavity whose faces point inward.

    The cavity faces cannot be seen from anywhere outside the block.
    """
    b = _Builder()
    b.box((0, 0, 0), (size, size, size), faces="xXyYZ")
    lo = (size - cavity) / 2.0
    b.box((lo, lo, lo), (lo + cavity,) * 3, inward=True)
    return b.mesh(max_area)


SHAPES = {
    "plate": flat_plate,
    "cube": unit_cube,
    "open_box": open_box,
    "house": house,
    "l_tower": l_tower,
    "hollow_block": hollow_block,
}
