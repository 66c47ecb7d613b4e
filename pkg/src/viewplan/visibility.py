"""Visibility of mesh triangles from viewpoints and the binary visibility matrix.

A triangle (its centroid) is visible from a viewpoint when it is within
range, inside the view cone, seen at an incidence angle no larger than
``beta_max`` and not occluded by any other triangle. Occlusion queries go
through an axis-aligned BVH and are evaluated for all rays of one
viewpoint at once.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import IoError, ParseError

EPS_RAY = 1e-6
EPS_OCC = 1e-4
PARALLEL_DET = 1e-12


@dataclass(frozen=True)
class CameraModel:
    fod: float = 30.0
    fov: float = 80.0
    beta_max: float = 75.0
    min_range: float = 0.0
    strict_vertices: bool = False

    def __post_init__(self):
        if not self.fod > self.min_range >= 0:
            raise ValueError("need fod > min_range >= 0")
        if not 0 < self.fov < 180:
            raise ValueError("fov must lie in (0, 180) degrees")
        if not 0 < self.beta_max <= 90:
            raise ValueError("beta_max must lie in (0, 90] degrees")

    @property
    def cos_half_fov(self):
        return math.cos(math.radians(self.fov) / 2.0)

    @property
    def cos_beta_max(self):
        return math.cos(math.radians(self.beta_max))


@dataclass
class VisibilityMatrix:
    bits: np.ndarray  # (m, n) bool

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ValueError("visibility matrix must be 2-D")

    @property
    def m(self):
        return self.bits.shape[0]

    @property
    def n(self):
        return self.bits.shape[1]

    def extended(self, rows):
        rows = np.asarray(rows, dtype=bool).reshape(-1, self.n)
        return VisibilityMatrix(np.vstack([self.bits, rows]))

    def __eq__(self, other):
        return isinstance(other, VisibilityMatrix) and np.array_equal(self.bits, other.bits)


# --------------------------------------------------------------------------- ray / triangle

def ray_triangle_intersect(origin, direction, tri, eps=EPS_RAY):
    """Möller–Trumbore. Returns ``(hit, t)``; edges count as hits, t must exceed ``eps``."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    v0, v1, v2 = (np.asarray(p, dtype=float) for p in tri)
    e1, e2 = v1 - v0, v2 - v0
    pvec = np.cross(d, e2)
    det = float(np.dot(e1, pvec))
    if abs(det) < PARALLEL_DET:
        return False, math.inf
    inv = 1.0 / det
    tvec = o - v0
    u = float(np.dot(tvec, pvec)) * inv
    if u < 0.0 or u > 1.0:
        return False, math.inf
    qvec = np.cross(tvec, e1)
    v = float(np.dot(d, qvec)) * inv
    if v < 0.0 or u + v > 1.0:
        return False, math.inf
    t = float(np.dot(e2, qvec)) * inv
    if t <= eps:
        return False, math.inf
    return True, t


def ray_triangle_batch(origins, dirs, corners, eps=EPS_RAY):
    """Vectorised Möller–Trumbore: (r, t) array of hit distances, inf where missed."""
    o = origins[:, None, :]
    d = dirs[:, None, :]
    v0 = corners[None, :, 0]
    e1 = corners[None, :, 1] - v0
    e2 = corners[None, :, 2] - v0
    pvec = np.cross(d, e2)
    det = np.einsum("rtk,rtk->rt", np.broadcast_to(e1, pvec.shape), pvec)
    ok = np.abs(det) >= PARALLEL_DET
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = o - v0
        u = np.einsum("rtk,rtk->rt", tvec, pvec) * inv
        qvec = np.cross(tvec, e1)
        v = np.einsum("rtk,rtk->rt", np.broadcast_to(d, qvec.shape), qvec) * inv
        t = np.einsum("rtk,rtk->rt", np.broadcast_to(e2, qvec.shape), qvec) * inv
    hit = ok & (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > eps)
    return np.where(hit, t, np.inf)


# --------------------------------------------------------------------------- BVH

class Bvh:
    """Median-split bounding volume hierarchy over triangles (immutable once built)."""

    def __init__(self, corners, leaf_size=8):
        corners = np.asarray(corners, dtype=float)
        self.corners = corners
        tri_min = corners.min(axis=1)
        tri_max = corners.max(axis=1)
        cent = corners.mean(axis=1)
        order = np.arange(len(corners))

        lo, hi, left, right, start, count = [], [], [], [], [], []

        def build(idx):
            node = len(lo)
            lo.append(tri_min[idx].min(axis=0))
            hi.append(tri_max[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(-1)
            count.append(0)
            if len(idx) <= leaf_size:
                start[node] = len(leaf_order)
                count[node] = len(idx)
                leaf_order.extend(idx.tolist())
                return node
            c = cent[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            idx = idx[np.argsort(c[:, axis], kind="stable")]
            mid = len(idx) // 2
            left[node] = build(idx[:mid])
            right[node] = build(idx[mid:])
            return node

        leaf_order = []
        build(order)
        self.lo = np.array(lo)
        self.hi = np.array(hi)
        self.left = np.array(left)
        self.right = np.array(right)
        self.start = np.array(start)
        self.count = np.array(count)
        self.order = np.array(leaf_order, dtype=np.int64)
        self.leaf_corners = corners[self.order]

    @classmethod
    def from_mesh(cls, mesh, leaf_size=8):
        return cls(mesh.corners(), leaf_size)

    def __len__(self):
        return len(self.lo)

    def occluded(self, origin, targets, exclude, eps_occ=EPS_OCC, eps_ray=EPS_RAY):
        """For each target point, is the segment from ``origin`` blocked by a triangle other than ``exclude[i]``?"""
        targets = np.asarray(targets, dtype=float).reshape(-1, 3)
        exclude = np.asarray(exclude, dtype=np.int64)
        r = len(targets)
        origins = np.broadcast_to(np.asarray(origin, dtype=float), (r, 3)) if np.ndim(origin) == 1 \
            else np.asarray(origin, dtype=float)
        seg = targets - origins
        length = np.linalg.norm(seg, axis=1)
        dirs = seg / np.where(length > 0, length, 1.0)[:, None]
        tmax = length - eps_occ
        blocked = np.zeros(r, dtype=bool)
        safe = np.where(np.abs(dirs) < 1e-30, np.copysign(1e-30, dirs), dirs)
        inv = 1.0 / safe

        stack = [(0, np.flatnonzero(tmax > eps_ray))]
        while stack:
            node, rays = stack.pop()
            rays = rays[~blocked[rays]]
            if len(rays) == 0:
                continue
            t1 = (self.lo[node] - origins[rays]) * inv[rays]
            t2 = (self.hi[node] - origins[rays]) * inv[rays]
            tnear = np.minimum(t1, t2).max(axis=1)
            tfar = np.maximum(t1, t2).min(axis=1)
            pad = 1e-9 * (1.0 + tmax[rays])
            rays = rays[(tnear <= np.minimum(tfar, tmax[rays]) + pad) & (tfar >= -pad)]
            if len(rays) == 0:
                continue
            if self.count[node]:
                s, c = self.start[node], self.count[node]
                t = ray_triangle_batch(origins[rays], dirs[rays], self.leaf_corners[s:s + c], eps_ray)
                t[exclude[rays][:, None] == self.order[s:s + c][None, :]] = np.inf
                hit = (t < tmax[rays][:, None]).any(axis=1)
                blocked[rays[hit]] = True
            else:
                stack.append((self.right[node], rays))
                stack.append((self.left[node], rays))
        return blocked


def occluded_bruteforce(corners, origin, targets, exclude, eps_occ=EPS_OCC, eps_ray=EPS_RAY):
    """Same contract as :meth:`Bvh.occluded`, testing every triangle."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(origin, dtype=float), targets.shape)
    seg = targets - origins
    length = np.linalg.norm(seg, axis=1)
    dirs = seg / np.where(length > 0, length, 1.0)[:, None]
    t = ray_triangle_batch(origins, dirs, corners, eps_ray)
    t[np.arange(len(targets)), np.asarray(exclude)] = np.inf
    return (t < (length - eps_occ)[:, None]).any(axis=1) & (length - eps_occ > eps_ray)


# --------------------------------------------------------------------------- visibility

def _view_conditions(P, direction, points, normals, cam):
    """Range, cone and incidence tests for an (n, 3) point array; returns a bool mask."""
    rel = points - P
    dist = np.linalg.norm(rel, axis=1)
    ok = (dist > cam.min_range) & (dist <= cam.fod)
    safe = np.where(dist > 0, dist, 1.0)
    ok &= (rel @ direction) / safe >= cam.cos_half_fov
    ok &= -np.einsum("ij,ij->i", normals, rel) / safe >= cam.cos_beta_max
    return ok & (dist > 0)


def _sample_points(mesh, cam):
    """(n, s, 3) points per triangle checked for visibility: centroid, plus corners in strict mode."""
    if cam.strict_vertices:
        return np.concatenate([mesh.centroids[:, None, :], mesh.corners()], axis=1)
    return mesh.centroids[:, None, :]


def visible_row(vp, mesh, cam, bvh=None, samples=None):
    samples = _sample_points(mesh, cam) if samples is None else samples
    n, s = samples.shape[:2]
    row = np.ones(n, dtype=bool)
    for k in range(s):
        pts = samples[:, k]
        cand = _view_conditions(vp.position, vp.direction, pts, mesh.normals, cam) & row
        idx = np.flatnonzero(cand)
        if len(idx):
            if bvh is None:
                blocked = occluded_bruteforce(mesh.corners(), vp.position, pts[idx], idx)
            else:
                blocked = bvh.occluded(vp.position, pts[idx], idx)
            cand[idx[blocked]] = False
        row = cand
    return row


def is_visible(vp, tri_index, mesh, cam, bvh=None):
    j = int(tri_index)
    pts = _sample_points(mesh, cam)[j]
    for p in pts:
        if not _view_conditions(vp.position, vp.direction, p[None], mesh.normals[j:j + 1], cam)[0]:
            return False
        if bvh is None:
            blocked = occluded_bruteforce(mesh.corners(), vp.position, p[None], [j])[0]
        else:
            blocked = bvh.occluded(vp.position, p[None], [j])[0]
        if blocked:
            return False
    return True


def visibility_matrix(vps, mesh, cam, bvh=None, workers=1, use_bvh=True):
    """Stack one row per viewpoint. Rows are independent; ``workers`` only changes wall time."""
    if bvh is None and use_bvh:
        bvh = Bvh.from_mesh(mesh)
    samples = _sample_points(mesh, cam)
    vps = list(vps)
    if not vps:
        return VisibilityMatrix(np.zeros((0, mesh.n_triangles), dtype=bool))

    def row(vp):
        return visible_row(vp, mesh, cam, bvh, samples)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, vps))
    else:
        rows = [row(vp) for vp in vps]
    return VisibilityMatrix(np.vstack(rows))


def coverage_stats(A, s):
    """Per-triangle cover counts c = s . A and the number of triangles covered at least once."""
    bits = A.bits if isinstance(A, VisibilityMatrix) else np.asarray(A, dtype=bool)
    s = np.asarray(s).astype(np.int64).ravel()
    if len(s) != bits.shape[0]:
        raise ValueError(f"selection has length {len(s)}, matrix has {bits.shape[0]} rows")
    c = s @ bits.astype(np.int64)
    return c, int(np.count_nonzero(c))


# --------------------------------------------------------------------------- bit-matrix files

def write_bitmatrix(path, A):
    """Header ``m n``, then one hex string per row; column 0 is the high bit of the first digit."""
    bits = A.bits if isinstance(A, VisibilityMatrix) else np.asarray(A, dtype=bool)
    m, n = bits.shape
    width = (n + 3) // 4
    lines = [f"{m} {n}"]
    for row in bits:
        value = int("".join("1" if b else "0" for b in row) + "0" * (4 * width - n) or "0", 2)
        lines.append(format(value, f"0{width}x") if width else "")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_bitmatrix(path):
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not lines:
        raise ParseError("empty bit-matrix file", 1)
    try:
        m, n = (int(x) for x in lines[0].split())
    except ValueError:
        raise ParseError("header must be 'm n'", 1) from None
    width = (n + 3) // 4
    rows = [ln.strip() for ln in lines[1:1 + m]]
    if len(rows) != m:
        raise ParseError(f"expected {m} rows, found {len(rows)}", len(lines))
    bits = np.zeros((m, n), dtype=bool)
    for i, h in enumerate(rows):
        if len(h) != width:
            raise ParseError(f"row has {len(h)} hex digits, expected {width}", i + 2)
        try:
            value = int(h, 16) if h else 0
        except ValueError:
            raise ParseError("invalid hex row", i + 2) from None
        s = format(value, f"0{4 * width}b")[:n]
        bits[i] = np.frombuffer(s.encode(), dtype=np.uint8) == ord("1")
    return VisibilityMatrix(bits)
