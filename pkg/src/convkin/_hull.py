"""Hull primitives shared by polytopes and polyhedral convex functions.

Everything here works on raw numpy arrays. The public types in
:mod:`convkin.geometry` and :mod:`convkin.functions` wrap these helpers.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.spatial import ConvexHull

#: geometric predicate tolerance (coplanarity, coincidence, rank decisions)
EPS = 1e-9


def affine_frame(points, tol=EPS):
    """Orthonormal frame of the affine hull of ``points``.

    Returns
    -------
    origin : array, shape (n,)
    basis : array, shape (k, n)
        Orthonormal rows spanning the direction space; ``k`` is the affine
        dimension.
    coords : array, shape (N, k)
        Coordinates of the points in the frame.
    """
    pts = np.asarray(points, dtype=float)
    origin = pts.mean(axis=0)
    centered = pts - origin
    if len(pts) == 1:
        return origin, np.zeros((0, pts.shape[1])), np.zeros((1, 0))
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    scale = max(1.0, float(np.abs(pts).max()))
    rank = int(np.sum(s > tol * scale))
    basis = vt[:rank]
    return origin, basis, centered @ basis.T


def simplex_volumes(coords, simplices):
    """Full-dimensional volumes of simplices given by vertex indices."""
    k = coords.shape[1]
    if len(simplices) == 0:
        return np.zeros(0)
    v = coords[simplices]
    edges = v[:, 1:, :] - v[:, :1, :]
    return np.abs(np.linalg.det(edges)) / factorial(k)


def kvolume(coords, tol=EPS):
    """Volume of the convex hull of ``coords`` in its own dimension ``k``.

    ``coords`` must be full-dimensional in R^k (as returned by
    :func:`affine_frame`).
    """
    k = coords.shape[1]
    if k == 0:
        return 1.0
    if k == 1:
        return float(coords[:, 0].max() - coords[:, 0].min())
    return float(ConvexHull(coords).volume)


def lower_chain(t, h):
    """Lower hull of points ``(t_i, h_i)`` on the line (monotone chain).

    Returns the indices of the lower-hull vertices sorted by ``t``; interior
    collinear points are dropped and for repeated ``t`` the lowest ``h`` wins.
    """
    order = np.argsort(t, kind="stable")
    # cluster abscissae equal up to EPS, keep the lowest value of each cluster
    ts = t[order]
    new = np.ones(len(ts), dtype=bool)
    new[1:] = np.diff(ts) > EPS * np.maximum(1.0, np.abs(ts[:-1]))
    label = np.cumsum(new) - 1
    best = {}
    for lab, idx in zip(label, order):
        if lab not in best or h[idx] < h[best[lab]]:
            best[lab] = idx
    chain: list[int] = []
    for lab in range(label[-1] + 1 if len(label) else 0):
        idx = best[lab]
        while len(chain) >= 2:
            i, j = chain[-2], chain[-1]
            cross = (t[j] - t[i]) * (h[idx] - h[i]) - (h[j] - h[i]) * (t[idx] - t[i])
            scale = max(1.0, abs(t[idx] - t[i]) * (abs(h[idx]) + abs(h[i]) + 1.0))
            if cross <= EPS * scale:
                chain.pop()
            else:
                break
        chain.append(int(idx))
    return np.array(chain, dtype=int)


@dataclass(frozen=True)
class LowerHull:
    """Lower convex envelope of lifted points ``(p_i, h_i)``.

    Attributes are expressed in the affine frame of the ``p_i``: when the
    points span all of R^n the frame is the identity, otherwise ``basis`` has
    fewer rows than ``n``.
    """

    origin: np.ndarray
    basis: np.ndarray
    vertices: np.ndarray  # indices into the input, sorted
    simplices: np.ndarray  # (m, k+1) indices into the input
    gradients: np.ndarray  # (m, k) in frame coordinates
    intercepts: np.ndarray  # (m,) value at the frame origin
    volumes: np.ndarray  # (m,) k-volumes of the projected cells

    @property
    def full(self):
        return self.basis.shape[0] == self.origin.shape[0]

    def reindexed(self):
        """Same hull with point indices renumbered to ``0..len(vertices)-1``."""
        remap = np.full(int(self.vertices.max()) + 1, -1, dtype=int)
        remap[self.vertices] = np.arange(len(self.vertices))
        simp = remap[self.simplices] if len(self.simplices) else self.simplices
        return LowerHull(self.origin, self.basis, np.arange(len(self.vertices)), simp,
                         self.gradients, self.intercepts, self.volumes)

    def global_gradients(self):
        """Cell gradients as vectors of R^n (valid when :attr:`full`)."""
        return self.gradients @ self.basis


def _identity_frame(points):
    n = points.shape[1]
    return np.zeros(n), np.eye(n), points


def lower_hull(points, heights, tol=EPS):
    """Compute the lower envelope of the lifted point set ``{(p_i, h_i)}``.

    The regular subdivision of ``conv{p_i}`` induced by the heights is
    returned as a triangulation: each simplex carries the gradient and
    intercept of the affine piece it lies on and its volume.
    """
    pts = np.asarray(points, dtype=float)
    h = np.asarray(heights, dtype=float)
    n = pts.shape[1]
    if len(pts) == 0:
        raise ValueError("empty point set")

    origin, basis, coords = affine_frame(pts, tol)
    k = basis.shape[0]
    if k == n:
        origin, basis, coords = _identity_frame(pts)

    if k == 0:
        best = int(np.argmin(h))
        return LowerHull(origin, basis, np.array([best]), np.zeros((0, 1), int),
                         np.zeros((0, 0)), np.zeros(0), np.zeros(0))

    if k == 1:
        t = coords[:, 0]
        chain = lower_chain(t, h)
        if len(chain) == 1:
            simp = np.zeros((0, 2), int)
            return LowerHull(origin, basis, chain, simp, np.zeros((0, 1)),
                             np.zeros(0), np.zeros(0))
        simp = np.stack([chain[:-1], chain[1:]], axis=1)
        dt = t[simp[:, 1]] - t[simp[:, 0]]
        slopes = (h[simp[:, 1]] - h[simp[:, 0]]) / dt
        intercepts = h[simp[:, 0]] - slopes * t[simp[:, 0]]
        return LowerHull(origin, basis, np.sort(chain), simp, slopes[:, None],
                         intercepts, np.abs(dt))

    # drop exact duplicates in the domain, keeping the lowest height
    order = np.lexsort((h,) + tuple(coords[:, i] for i in range(k - 1, -1, -1)))
    keep = np.ones(len(order), dtype=bool)
    sorted_coords = coords[order]
    same = np.all(np.abs(np.diff(sorted_coords, axis=0)) <= tol * 1e-3, axis=1)
    keep[1:] = ~same
    idx = order[keep]

    c = coords[idx]
    hh = h[idx]
    span = float(np.ptp(c, axis=0).max()) + float(np.ptp(hh)) + 1.0
    top = np.concatenate([c.mean(axis=0), [hh.max() + span]])
    lifted = np.vstack([np.column_stack([c, hh]), top])
    hull = ConvexHull(lifted)
    eq = hull.equations
    lower = eq[:, k] < -1e-10
    simp = hull.simplices[lower]
    eq = eq[lower]
    gradients = -eq[:, :k] / eq[:, k:k + 1]
    intercepts = -eq[:, k + 1] / eq[:, k]
    vols = simplex_volumes(c, simp)
    nonzero = vols > 0.0
    simp, gradients, intercepts, vols = simp[nonzero], gradients[nonzero], intercepts[nonzero], vols[nonzero]
    simp_global = idx[simp]
    verts = np.unique(simp_global)
    return LowerHull(origin, basis, verts, simp_global, gradients, intercepts, vols)


def merge_atoms(locations, masses, tol=EPS):
    """Merge atoms whose locations are within ``tol`` (sup-norm, relative).

    Total mass is preserved exactly; the merged location is the
    mass-agnostic mean of the cluster.
    """
    locs = np.asarray(locations, dtype=float)
    m = np.asarray(masses, dtype=float)
    if len(m) == 0:
        return locs.reshape(0, locs.shape[1] if locs.ndim == 2 else 0), m
    scale = 1.0 + np.abs(locs).max(axis=1)
    # sort along a generic direction; only atoms whose keys fall within a
    # window of a neighbour can merge, so the pairwise sweep is restricted
    # to those runs
    key = locs @ np.linspace(1.0, 1.6180339887, locs.shape[1])
    order = np.argsort(key, kind="stable")
    width = tol * float(scale.max()) * locs.shape[1] * 2.0
    close = np.diff(key[order]) <= width
    labels = np.arange(len(m))
    reps = list(range(len(m)))
    if close.any():
        labels = -np.ones(len(m), dtype=int)
        reps = []
        run_start = 0
        for pos in range(len(order) + 1):
            if pos < len(order) and (pos == 0 or close[pos - 1]):
                continue
            run = order[run_start:pos]  # maximal chain of close keys
            for q, i in enumerate(run):
                found = -1
                for j in run[:q]:
                    if np.max(np.abs(locs[j] - locs[i])) <= tol * max(scale[i], scale[j]):
                        found = labels[j]
                        break
                if found < 0:
                    found = len(reps)
                    reps.append(i)
                labels[i] = found
            run_start = pos
    out_m = np.zeros(len(reps))
    np.add.at(out_m, labels, m)
    counts = np.bincount(labels, minlength=len(reps)).astype(float)
    out_l = np.zeros((len(reps), locs.shape[1]))
    np.add.at(out_l, labels, locs)
    out_l /= counts[:, None]
    return out_l, out_m
