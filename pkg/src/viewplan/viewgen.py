"""Candidate viewpoints from clusters, with local potential-field position correction."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import CancelledField, CorrectionFailed, DegenerateNormal
from .spectral import kmeans

log = logging.getLogger(__name__)

DEGENERATE_RESULTANT = 1e-6
CANCELLED = 1e-9


@dataclass(frozen=True)
class Viewpoint:
    position: np.ndarray
    direction: np.ndarray
    source_cluster: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        d = np.asarray(self.direction, dtype=float).reshape(3)
        norm = np.linalg.norm(d)
        if not norm > 0:
            raise ValueError("viewpoint direction must be non-zero")
        object.__setattr__(self, "direction", d / norm)

    def to_dict(self):
        return {
            "position": [float(x) for x in self.position],
            "direction": [float(x) for x in self.direction],
            "cluster": -1 if self.source_cluster is None else int(self.source_cluster),
        }


@dataclass(frozen=True)
class ConstraintSpace:
    """Clearance and altitude limits for viewpoint positions.

    ``correction_step`` defaults to d_safe / 4 and ``d_step`` to 5 % of the
    offset distance when left as None.
    """

    d_safe: float = 5.0
    h_limit: float = 2.0
    max_correction_iters: int = 20
    d_step: float | None = None
    correction_step: float | None = None
    exact_clearance: bool = False

    def __post_init__(self):
        if not self.d_safe > 0:
            raise ValueError("d_safe must be positive")
        if self.d_step is not None and not self.d_step > 0:
            raise ValueError("d_step must be positive")
        if self.correction_step is not None and not self.correction_step > 0:
            raise ValueError("correction_step must be positive")

    def step(self):
        return self.correction_step if self.correction_step is not None else self.d_safe / 4.0

    def retreat_step(self, d):
        return self.d_step if self.d_step is not None else 0.05 * d


@dataclass
class Candidate:
    viewpoint: Viewpoint
    center: np.ndarray
    members: np.ndarray
    corrected: bool = False
    retreats: int = 0


@dataclass
class GenerationReport:
    candidates: list = field(default_factory=list)
    failed: int = 0
    splits: int = 0


def cluster_center_and_normal(mesh, members):
    """Mean member centroid and mean unit normal (unnormalised); third value flags ||N|| < 1e-6."""
    members = np.asarray(members, dtype=np.int64)
    if len(members) == 0:
        raise ValueError("empty cluster")
    C = mesh.centroids[members].mean(axis=0)
    N = mesh.normals[members].mean(axis=0)
    return C, N, bool(np.linalg.norm(N) < DEGENERATE_RESULTANT)


def generate_viewpoint(C, N, d, cluster=None):
    C = np.asarray(C, dtype=float)
    N = np.asarray(N, dtype=float)
    norm = np.linalg.norm(N)
    if not norm > 0:
        raise DegenerateNormal("resultant normal has zero length")
    if not d > 0:
        raise ValueError("offset distance must be positive")
    P = C + d * (N / norm)
    return Viewpoint(P, C - P, cluster)


def point_triangle_distance(P, corners):
    """Exact Euclidean distance from P to each triangle in a (k, 3, 3) corner array."""
    P = np.asarray(P, dtype=float)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab, ac, ap = b - a, c - a, P - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = P - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = P - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
        closest = a + ab * v_in[:, None] + ac * w_in[:, None]
        # edge regions
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    region_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    region_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    region_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    closest = np.where(region_bc[:, None], b + (c - b) * t_bc[:, None], closest)
    closest = np.where(region_ac[:, None], a + ac * t_ac[:, None], closest)
    closest = np.where(region_ab[:, None], a + ab * t_ab[:, None], closest)
    # vertex regions take precedence
    closest = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, closest)
    closest = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, closest)
    closest = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, closest)
    return np.linalg.norm(P - closest, axis=1)


def clearance(P, mesh, exact=False):
    P = np.asarray(P, dtype=float)
    if exact:
        return float(point_triangle_distance(P, mesh.corners()).min())
    return float(np.linalg.norm(mesh.centroids - P, axis=1).min())


def repulsion_correction(P, mesh, d_safe):
    """Unit sum of (P - p_i) over centroids closer than d_safe; None when nothing is too close."""
    P = np.asarray(P, dtype=float)
    diff = P - mesh.centroids
    close = np.linalg.norm(diff, axis=1) < d_safe
    if not close.any():
        return None
    total = diff[close].sum(axis=0)
    norm = np.linalg.norm(total)
    if norm < CANCELLED:
        raise CancelledField(f"repulsion from {int(close.sum())} centroids cancels out")
    return total / norm


def altitude_correction(P, h_limit):
    P = np.asarray(P, dtype=float)
    if not P[2] < h_limit:
        return None
    return np.array([0.0, 0.0, 1.0])


def is_feasible(P, mesh, cs):
    P = np.asarray(P, dtype=float)
    return P[2] >= cs.h_limit and clearance(P, mesh, cs.exact_clearance) >= cs.d_safe


def _push(P, mesh, cs):
    """Potential-field steps; returns (P, feasible)."""
    step = cs.step()
    for _ in range(cs.max_correction_iters):
        if is_feasible(P, mesh, cs):
            return P, True
        try:
            rep = repulsion_correction(P, mesh, cs.d_safe)
        except CancelledField:
            return P, False
        if rep is None and cs.exact_clearance and clearance(P, mesh, True) < cs.d_safe:
            # centroids are clear but a triangle interior is not: push off the nearest face
            i = int(np.argmin(point_triangle_distance(P, mesh.corners())))
            rep = mesh.normals[i] if np.dot(P - mesh.centroids[i], mesh.normals[i]) >= 0 else -mesh.normals[i]
        alt = altitude_correction(P, cs.h_limit)
        parts = [v for v in (rep, alt) if v is not None]
        total = np.sum(parts, axis=0)
        norm = np.linalg.norm(total)
        if norm < CANCELLED:
            return P, False
        P = P + step * total / norm
    return P, is_feasible(P, mesh, cs)


def correct_viewpoint(vp, C, N, d, mesh, cs, with_stats=False):
    """Move ``vp`` into the constraint space.

    Potential-field pushes first; if those do not suffice, the offset along
    the resultant shrinks by ``d_step`` per retreat with pushes re-applied
    each time. The returned viewpoint is re-aimed at C. Raises
    :class:`CorrectionFailed` once the offset reaches zero.
    """
    C = np.asarray(C, dtype=float)
    N_hat = np.asarray(N, dtype=float) / np.linalg.norm(N)
    P = np.array(vp.position, dtype=float)
    if is_feasible(P, mesh, cs):
        return (vp, 0) if with_stats else vp

    P, ok = _push(P, mesh, cs)
    retreats = 0
    d_step = cs.retreat_step(d)
    while not ok:
        retreats += 1
        offset = d - retreats * d_step
        if offset <= 0:
            raise CorrectionFailed(f"no feasible position along the resultant after {retreats - 1} retreats")
        P, ok = _push(C + offset * N_hat, mesh, cs)

    aim = C - P
    if np.linalg.norm(aim) == 0:
        raise CorrectionFailed("corrected position coincides with the cluster center")
    out = Viewpoint(P, aim, vp.source_cluster)
    return (out, retreats) if with_stats else out


def _split(mesh, members, seed):
    pts = np.hstack([mesh.normals[members], 1e-3 * mesh.centroids[members]])
    a = kmeans(pts, 2, seed=seed)
    return [members[a.labels == c] for c in range(2)]


def _too_spread(mesh, members, N, max_spread_deg):
    if max_spread_deg is None or len(members) < 2:
        return False
    cos = mesh.normals[members] @ (N / np.linalg.norm(N))
    return bool(cos.min() < np.cos(np.radians(max_spread_deg)))


def generate_candidates(mesh, clusters, d, cs, seed=0, first_index=0, max_spread_deg=None):
    """One corrected viewpoint per cluster.

    ``clusters`` is a list of member arrays. A cluster whose normals cancel
    is split in two; so is one where some member normal is more than
    ``max_spread_deg`` off the resultant, since the single viewpoint could
    not see that member at an acceptable incidence angle. Infeasible
    candidates are counted in ``report.failed`` and left out.
    """
    report = GenerationReport()
    queue = [np.asarray(m, dtype=np.int64) for m in clusters]
    label = first_index
    while queue:
        members = queue.pop(0)
        C, N, degenerate = cluster_center_and_normal(mesh, members)
        if degenerate or _too_spread(mesh, members, N, max_spread_deg):
            if len(members) < 2:
                report.failed += 1
                continue
            report.splits += 1
            queue[:0] = _split(mesh, members, seed)
            continue
        vp = generate_viewpoint(C, N, d, cluster=label)
        try:
            fixed, retreats = correct_viewpoint(vp, C, N, d, mesh, cs, with_stats=True)
        except CorrectionFailed as exc:
            log.debug("cluster %d: %s", label, exc)
            report.failed += 1
            label += 1
            continue
        report.candidates.append(
            Candidate(fixed, C, members, corrected=fixed is not vp, retreats=retreats)
        )
        label += 1
    return report
