"""Spectral clustering of mesh triangles.

Pairwise cost mixes centroid distance and normal angle, a Gaussian kernel
turns it into similarity, and the random-walk Laplacian's eigenvectors
embed each triangle for k-means.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateSubset, EigenFailure, ViewPlanError, ZeroDegreeRow

ZERO_EIGENVALUE = 1e-10
MAX_DENSE = 2000

EIGENVECTOR_ORDERS = ("smallest", "smallest_nonzero", "largest")


class SubsetTooLarge(ViewPlanError):
    pass


@dataclass(frozen=True)
class ClusterParams:
    k: int = 1
    theta: float = 0.5
    sigma: float = 0.35
    kmeans_max_iter: int = 100
    seed: int = 0
    eigenvector_order: str = "smallest"

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.eigenvector_order not in EIGENVECTOR_ORDERS:
            raise ValueError(f"eigenvector_order must be one of {EIGENVECTOR_ORDERS}")


@dataclass
class ClusterAssignment:
    """``labels[i]`` is the cluster of ``subset[i]``; ``members[c]`` holds mesh triangle indices."""

    labels: np.ndarray
    subset: np.ndarray
    members: list = field(default_factory=list)

    @classmethod
    def from_labels(cls, labels, subset, k):
        labels = np.asarray(labels, dtype=np.int64)
        subset = np.asarray(subset, dtype=np.int64)
        members = [subset[labels == c] for c in range(k)]
        return cls(labels, subset, members)

    @property
    def k(self):
        return len(self.members)


def _symmetric(m):
    upper = np.triu(m, 1)
    return upper + upper.T


def cost_matrix(mesh, subset, theta):
    """theta * (normalised centroid distance) + (1 - theta) * (normal angle / pi)."""
    subset = np.asarray(subset, dtype=np.int64)
    if len(subset) < 2:
        raise ValueError("cost matrix needs at least two triangles")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    dist = squareform(pdist(mesh.centroids[subset]))
    dmax = dist.max()
    if dmax <= 0.0:
        raise DegenerateSubset("all centroids coincide")
    n = mesh.normals[subset]
    cross = np.linalg.norm(np.cross(n[:, None, :], n[None, :, :]), axis=2)
    angle = np.arctan2(cross, n @ n.T)
    g = theta * (dist / dmax) + (1.0 - theta) * (angle / math.pi)
    return _symmetric(g)


def similarity_matrix(G, sigma):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    G = np.asarray(G, dtype=float)
    W = np.exp(-(G * G) / (2.0 * sigma * sigma))
    W = _symmetric(W)
    np.fill_diagonal(W, 1.0)
    return W


def degrees(W):
    d = np.asarray(W, dtype=float).sum(axis=1)
    if np.any(d <= 0.0):
        raise ZeroDegreeRow("similarity matrix has a row with zero degree")
    return d


def rw_laplacian(W):
    """I - D^-1 W."""
    W = np.asarray(W, dtype=float)
    d = degrees(W)
    return np.eye(len(W)) - W / d[:, None]


def spectral_embed(L_rw, k, degrees=None, order="smallest"):
    """Eigenvector embedding of the random-walk Laplacian; one row per node.

    When the degree vector is supplied, the eigenproblem is solved on the
    symmetric matrix D^-1/2 W D^-1/2 and the vectors mapped back with
    D^-1/2 (same eigenvalues as L_rw, exact real arithmetic). Otherwise a
    general eigensolver runs on L_rw directly.

    ``order``: ``"smallest"`` takes the k smallest eigenvalues including the
    trivial zero, ``"smallest_nonzero"`` skips eigenvalues <= 1e-10,
    ``"largest"`` takes the k largest.
    """
    L_rw = np.asarray(L_rw, dtype=float)
    n = len(L_rw)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    if n > MAX_DENSE:
        raise SubsetTooLarge(
            f"{n} triangles exceeds the dense eigensolver limit {MAX_DENSE}; "
            "cluster smaller subsets or coarsen the subdivision"
        )
    try:
        if degrees is not None:
            s = np.sqrt(np.asarray(degrees, dtype=float))
            # D^1/2 (I - L_rw) D^-1/2 = D^-1/2 W D^-1/2
            M = (s[:, None] * (np.eye(n) - L_rw)) / s[None, :]
            M = 0.5 * (M + M.T)
            mu, vecs = np.linalg.eigh(M)
            vals = 1.0 - mu
            vecs = vecs / s[:, None]
            vecs /= np.linalg.norm(vecs, axis=0)
        else:
            vals, vecs = np.linalg.eig(L_rw)
            vals, vecs = vals.real, vecs.real
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(vals)):
        raise EigenFailure("non-finite eigenvalues")

    idx = np.argsort(vals, kind="stable")
    if order == "smallest_nonzero":
        idx = idx[vals[idx] > ZERO_EIGENVALUE]
    elif order == "largest":
        idx = idx[::-1]
    elif order != "smallest":
        raise ValueError(f"unknown eigenvector order {order!r}")
    if len(idx) < k:
        raise EigenFailure(f"only {len(idx)} eligible eigenvectors for k={k}")
    emb = vecs[:, idx[:k]]
    # fix the sign so the output does not depend on the solver's choice
    pivot = np.argmax(np.abs(emb), axis=0)
    signs = np.sign(emb[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return emb * signs


def _kmeanspp(points, k, rng):
    n = len(points)
    centers = [int(rng.integers(n))]
    d2 = np.sum((points - points[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, n - 1)
        else:
            free = np.setdiff1d(np.arange(n), centers)
            nxt = int(free[rng.integers(len(free))]) if len(free) else int(rng.integers(n))
        centers.append(nxt)
        d2 = np.minimum(d2, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[centers].copy()


def _assign(points, centers):
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def _repair_empty(points, labels, dist2, k):
    """Move the worst-fitting point of a multi-member cluster into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.where(movable, dist2, -1.0)
        p = int(np.argmax(cand))
        counts[labels[p]] -= 1
        labels[p] = c
        counts[c] = 1
        dist2[p] = 0.0
    return labels


def kmeans(points, k, seed=0, max_iter=100, subset=None):
    """Lloyd iterations from k-means++ seeds; never returns an empty cluster."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    subset = np.arange(n) if subset is None else np.asarray(subset)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(points, k, rng)
    labels = None
    for _ in range(max(1, max_iter)):
        new, dist2 = _assign(points, centers)
        new = _repair_empty(points, new, dist2, k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    return ClusterAssignment.from_labels(labels, subset, k)


def cluster_mesh(mesh, subset, params):
    """Cost -> similarity -> random-walk Laplacian -> embedding -> k-means."""
    subset = np.asarray(subset, dtype=np.int64)
    k = params.k
    if len(subset) < k:
        raise ValueError(f"subset of {len(subset)} triangles cannot form {k} clusters")
    if k == len(subset):
        return ClusterAssignment.from_labels(np.arange(k), subset, k)
    if k == 1:
        return ClusterAssignment.from_labels(np.zeros(len(subset), dtype=np.int64), subset, 1)
    G = cost_matrix(mesh, subset, params.theta)
    W = similarity_matrix(G, params.sigma)
    d = degrees(W)
    L = rw_laplacian(W)
    emb = spectral_embed(L, k, degrees=d, order=params.eigenvector_order)
    return kmeans(emb, k, seed=params.seed, max_iter=params.kmeans_max_iter, subset=subset)


def footprint_area(fod, fov_deg, offset_factor=0.95):
    """Surface patch a camera at offset_factor * fod from a plane can see head-on.

    Range and cone both bound it; the smaller disk wins (at the default
    offset the range limit does, with radius ~0.31 * fod).
    """
    d = offset_factor * fod
    r_range = math.sqrt(max(fod * fod - d * d, 0.0))
    r_cone = d * math.tan(math.radians(fov_deg) / 2.0)
    r = min(r_range, r_cone)
    if r <= 0:
        r = r_cone
    return math.pi * r * r


def auto_k(area, fod, fov_deg, packing=0.5, offset_factor=0.95):
    """One cluster per expected camera footprint: ceil(area / (packing * footprint))."""
    return max(1, math.ceil(area / (packing * footprint_area(fod, fov_deg, offset_factor))))
