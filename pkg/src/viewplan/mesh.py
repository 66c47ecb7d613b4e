"""Triangle meshes: loading (OBJ / STL / PLY), longest-edge subdivision, PLY export.

Everything downstream (clustering, viewpoint generation, visibility) reads
per-triangle centroids, unit normals and areas from :class:`TriangleMesh`.
"""
from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyMesh, IoError, ParseError, SubdivisionOverflow, UnreadableFile

log = logging.getLogger(__name__)

WELD_TOL = 1e-6
DEGENERATE_AREA = 1e-12
MAX_TRIANGLES = 200_000


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    @property
    def size(self):
        return self.max - self.min

    @property
    def center(self):
        return 0.5 * (self.min + self.max)

    def inflated(self, margin):
        return Aabb(self.min - margin, self.max + margin)


@dataclass
class LoadReport:
    dropped: int = 0
    welded: int = 0
    unreferenced: int = 0

    def __str__(self):
        return f"dropped: {self.dropped}, welded: {self.welded}, unreferenced: {self.unreferenced}"


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh with cached centroid, unit normal and area per face.

    Instances are immutable: the arrays are marked read-only after construction.
    Use :func:`build_mesh` to construct from raw arrays with welding and
    degenerate-triangle filtering.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    centroids: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(t) == 0:
            raise EmptyMesh("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise ValueError("triangle index out of range")
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cross = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norm
        if np.any(areas <= DEGENERATE_AREA):
            raise ValueError("degenerate triangle; construct through build_mesh to filter")
        for name, arr in (
            ("vertices", v),
            ("triangles", t),
            ("centroids", (p0 + p1 + p2) / 3.0),
            ("normals", cross / norm[:, None]),
            ("areas", areas),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def total_area(self):
        return float(self.areas.sum())

    def corners(self, idx=None):
        """(k, 3, 3) array of triangle corner coordinates."""
        tri = self.triangles if idx is None else self.triangles[idx]
        return self.vertices[tri]

    def translated(self, offset):
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=float), self.triangles)

    def scaled(self, factor):
        return TriangleMesh(self.vertices * float(factor), self.triangles)


def _weld(vertices, tol):
    """Map each vertex to a representative within ``tol`` (union-find over close pairs)."""
    n = len(vertices)
    parent = np.arange(n)
    if n == 0 or tol <= 0:
        return parent
    pairs = cKDTree(vertices).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return parent

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(i) for i in range(n)])


def build_mesh(vertices, triangles, weld_tol=WELD_TOL, flip_normals=False):
    """Weld, drop degenerate faces and unreferenced vertices; returns ``(mesh, report)``."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    report = LoadReport()
    if len(t) and (t.min() < 0 or t.max() >= len(v)):
        raise ParseError("face references a vertex that does not exist")
    if not np.all(np.isfinite(v)):
        raise ParseError("non-finite vertex coordinate")

    rep = _weld(v, weld_tol)
    report.welded = int(np.count_nonzero(rep != np.arange(len(v))))
    t = rep[t] if len(t) else t

    if len(t):
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        area = 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)
        repeated = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        keep = (area > DEGENERATE_AREA) & ~repeated
        report.dropped = int(np.count_nonzero(~keep))
        t = t[keep]
    if len(t) == 0:
        raise EmptyMesh("no valid triangles")

    used, inverse = np.unique(t, return_inverse=True)
    report.unreferenced = len(v) - report.welded - len(used)
    t = inverse.reshape(-1, 3)
    if flip_normals:
        t = t[:, [0, 2, 1]]
    if report.dropped:
        log.info("dropped %d degenerate triangles", report.dropped)
    return TriangleMesh(v[used], t), report


# --------------------------------------------------------------------------- readers

def _read_obj(text):
    verts, faces = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if len(verts[-1]) != 3:
                raise ParseError("vertex needs 3 coordinates", lineno)
        elif tag == "f":
            idx = []
            for tok in parts[1:]:
                try:
                    i = int(tok.split("/")[0])
                except ValueError:
                    raise ParseError(f"bad face index {tok!r}", lineno) from None
                if i == 0:
                    raise ParseError("OBJ indices are 1-based", lineno)
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise ParseError("face needs at least 3 vertices", lineno)
            if min(idx) < 0 or max(idx) >= len(verts):
                raise ParseError("face index out of range", lineno)
            faces.extend([idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1))
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _read_stl(data):
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if 84 + 50 * count == len(data):
            rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
            tris = np.frombuffer(data, dtype=rec, count=count, offset=84)["v"].astype(float)
            return tris.reshape(-1, 3), np.arange(3 * count).reshape(-1, 3)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise ParseError("binary STL with inconsistent triangle count", 0) from None
    verts = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if parts and parts[0] == "vertex":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    if len(verts) % 3:
        raise ParseError("vertex count is not a multiple of 3")
    return np.array(verts, dtype=float).reshape(-1, 3), np.arange(len(verts)).reshape(-1, 3)


def _read_ply(text):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic", 1)
    elements = []  # (name, count, [property names], face list property index or None)
    i = 1
    while True:
        if i >= len(lines):
            raise ParseError("unterminated header", i)
        parts = lines[i].split()
        i += 1
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise ParseError(f"unsupported PLY format {parts[1]!r}", i)
        elif parts[0] == "element":
            elements.append([parts[1], int(parts[2]), []])
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", i)
            elements[-1][2].append(parts[-1] if parts[1] != "list" else ("list", parts[-1]))
        elif parts[0] == "end_header":
            break

    verts, faces = [], []
    for name, count, props in elements:
        for _ in range(count):
            if i >= len(lines):
                raise ParseError(f"unexpected end of file in element {name!r}", i)
            lineno = i + 1
            tokens = lines[i].split()
            i += 1
            try:
                if name == "vertex":
                    rec = dict(zip(props, map(float, tokens)))
                    verts.append([rec["x"], rec["y"], rec["z"]])
                elif name == "face":
                    k = int(tokens[0])
                    idx = [int(x) for x in tokens[1 : 1 + k]]
                    if len(idx) < 3:
                        raise ParseError("face needs at least 3 vertices", lineno)
                    faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, k - 1))
            except (ValueError, KeyError, IndexError) as exc:
                raise ParseError(f"bad {name} record ({exc})", lineno) from None
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


FORMATS = ("obj", "stl", "ply")


def load_mesh(path, format=None, weld_tol=WELD_TOL, flip_normals=False, with_report=False):
    """Load an OBJ, STL (ASCII or binary) or ASCII PLY file.

    ``format`` defaults to the file extension. Vertices closer than
    ``weld_tol`` are merged and zero-area triangles dropped; the counts are
    logged and available through ``with_report=True``.
    """
    fmt = (format or os.path.splitext(str(path))[1].lstrip(".")).lower()
    if fmt not in FORMATS:
        raise ParseError(f"unknown mesh format {fmt!r}")
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UnreadableFile(str(exc)) from exc
    if fmt == "stl":
        v, t = _read_stl(data)
    else:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("file is not text") from None
        v, t = (_read_obj if fmt == "obj" else _read_ply)(text)
    mesh, report = build_mesh(v, t, weld_tol=weld_tol, flip_normals=flip_normals)
    return (mesh, report) if with_report else mesh


# --------------------------------------------------------------------------- geometry

def bounding_box(mesh):
    if mesh is None or len(mesh.vertices) == 0:
        raise EmptyMesh("bounding box of an empty mesh")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


def subdivide(mesh, max_area, max_triangles=MAX_TRIANGLES):
    """Split triangles at the midpoint of their longest edge until every area is <= ``max_area``.

    Midpoints of shared edges are shared, and each child keeps the parent's
    winding (hence its normal).
    """
    if not max_area > 0:
        raise ValueError("max_area must be positive")
    verts = [np.asarray(mesh.vertices, dtype=float)]
    n_verts = len(mesh.vertices)
    tris = np.array(mesh.triangles)
    areas = np.array(mesh.areas)
    midpoints = {}
    all_v = verts[0]

    while True:
        split = areas > max_area
        if not split.any():
            break
        n_split = int(split.sum())
        if len(tris) + n_split > max_triangles:
            raise SubdivisionOverflow(
                f"subdividing to max_area={max_area} exceeds {max_triangles} triangles"
            )
        t = tris[split]
        p = all_v[t]  # (k, 3, 3)
        # edge j runs from corner j to corner j+1
        edge_len = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        j = np.argmax(edge_len, axis=1)
        rows = np.arange(len(t))
        # rotate so the longest edge is (a, b)
        a = t[rows, j]
        b = t[rows, (j + 1) % 3]
        c = t[rows, (j + 2) % 3]

        new_pts = []
        mid = np.empty(len(t), dtype=np.int64)
        for r, (ia, ib) in enumerate(zip(a.tolist(), b.tolist())):
            key = (ia, ib) if ia < ib else (ib, ia)
            m = midpoints.get(key)
            if m is None:
                m = n_verts + len(new_pts)
                midpoints[key] = m
                new_pts.append(0.5 * (all_v[ia] + all_v[ib]))
            mid[r] = m
        if new_pts:
            all_v = np.vstack([all_v, np.array(new_pts)])
            n_verts = len(all_v)

        child_a = np.stack([a, mid, c], axis=1)
        child_b = np.stack([mid, b, c], axis=1)
        half = areas[split] * 0.5
        tris = np.concatenate([tris[~split], child_a, child_b])
        areas = np.concatenate([areas[~split], half, half])
        # recompute the children's areas exactly instead of trusting the halving
        q = all_v[tris[-2 * len(t):]]
        areas[-2 * len(t):] = 0.5 * np.linalg.norm(np.cross(q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]), axis=1)

    if len(tris) == mesh.n_triangles:
        return mesh
    return TriangleMesh(all_v, tris)


# --------------------------------------------------------------------------- export

def write_ply(path, mesh, face_colors=None, face_props=None, extra_vertices=None,
              extra_colors=None, edges=None):
    """Write an ASCII PLY.

    ``face_props`` maps property names to per-face integer arrays (e.g. a
    cluster label or a cover count). ``extra_vertices`` are appended after the
    mesh vertices; ``edges`` index into the combined vertex list.
    """
    v = np.asarray(mesh.vertices)
    extra = np.zeros((0, 3)) if extra_vertices is None else np.asarray(extra_vertices, dtype=float).reshape(-1, 3)
    all_v = np.vstack([v, extra])
    vcol = np.full((len(all_v), 3), 200, dtype=int)
    if extra_colors is not None and len(extra):
        vcol[len(v):] = np.asarray(extra_colors, dtype=int).reshape(-1, 3)
    face_props = dict(face_props or {})
    edges = np.zeros((0, 2), dtype=int) if edges is None else np.asarray(edges, dtype=int).reshape(-1, 2)

    out = ["ply", "format ascii 1.0", f"element vertex {len(all_v)}",
           "property float x", "property float y", "property float z",
           "property uchar red", "property uchar green", "property uchar blue",
           f"element face {mesh.n_triangles}", "property list uchar int vertex_indices"]
    if face_colors is not None:
        out += ["property uchar red", "property uchar green", "property uchar blue"]
    out += [f"property int {name}" for name in face_props]
    if len(edges):
        out += [f"element edge {len(edges)}", "property int vertex1", "property int vertex2"]
    out.append("end_header")
    for p, c in zip(all_v.tolist(), vcol.tolist()):
        out.append(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {c[0]} {c[1]} {c[2]}")
    cols = None if face_colors is None else np.asarray(face_colors, dtype=int).tolist()
    props = [np.asarray(a, dtype=int).tolist() for a in face_props.values()]
    for f, tri in enumerate(mesh.triangles.tolist()):
        row = f"3 {tri[0]} {tri[1]} {tri[2]}"
        if cols is not None:
            row += " {} {} {}".format(*cols[f])
        for arr in props:
            row += f" {arr[f]}"
        out.append(row)
    out.extend(f"{a} {b}" for a, b in edges.tolist())
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
