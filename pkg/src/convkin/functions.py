"""Finite representations of convex functions and the operations between them.

``MaxAffine`` represents finite convex functions ``v(x) = max_i <a_i, x> + b_i``.
``EpiPolyhedral`` represents super-coercive functions with compact polyhedral
domain as the lower convex envelope of finitely many lifted points.
Conjugation swaps the two exactly. ``RadialProfile`` covers rotation invariant
functions ``phi(|x|)`` on a ball, where most operations reduce to one
dimension.
"""

from __future__ import annotations

from functools import cached_property, lru_cache

import numpy as np

from ._hull import EPS, lower_hull
from .geometry import Polytope, Rotation, polytopal_ball

__all__ = [
    "MaxAffine",
    "EpiPolyhedral",
    "RadialProfile",
    "NotDeconvolvable",
    "conjugate",
    "inf_convolve",
    "epi_scale",
    "add",
    "rotate",
    "indicator",
    "support_fn",
    "point_indicator",
    "ball_indicator",
    "floor_body",
    "project",
    "inf_deconvolve",
    "cone_function",
    "evaluation_grid",
]


class NotDeconvolvable(ValueError):
    """Raised when the difference of conjugates is not convex."""


class MaxAffine:
    """Finite convex piecewise affine function ``max_i <a_i, x> + b_i``.

    Redundant pieces are removed on construction: piece ``i`` survives iff
    ``(a_i, -b_i)`` is a vertex of the lower hull of the lifted slopes.
    """

    def __init__(self, slopes, offsets):
        a = np.atleast_2d(np.asarray(slopes, dtype=float))
        b = np.asarray(offsets, dtype=float).reshape(-1)
        if len(a) != len(b) or len(a) == 0:
            raise ValueError("need matching, nonempty slopes and offsets")
        hull = lower_hull(a, -b)
        self.dim = a.shape[1]
        self.slopes = a[hull.vertices]
        self.offsets = b[hull.vertices]
        self._hull = hull.reindexed()

    def __repr__(self):
        return f"MaxAffine(dim={self.dim}, pieces={len(self.offsets)})"

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.max(x @ self.slopes.T + self.offsets, axis=1)

    def pieces(self):
        return list(zip(self.slopes, self.offsets))

    def same_as(self, other, tol=1e-9):
        """Equality of canonical piece sets up to ``tol``."""
        if self.dim != other.dim or len(self.offsets) != len(other.offsets):
            return False
        A = _sorted_rows(np.column_stack([self.slopes, self.offsets]))
        B = _sorted_rows(np.column_stack([other.slopes, other.offsets]))
        return bool(np.all(np.abs(A - B) <= tol * (1.0 + np.abs(A))))

    def to_dict(self):
        return {"type": "max_affine", "dim": self.dim,
                "pieces": [{"a": a.tolist(), "b": float(b)} for a, b in self.pieces()]}


class EpiPolyhedral:
    """Lower convex envelope of points ``(p_i, c_i)``, ``+inf`` off ``conv{p_i}``.

    Only the vertices of the lower envelope are retained.
    """

    def __init__(self, locations, values):
        p = np.atleast_2d(np.asarray(locations, dtype=float))
        c = np.asarray(values, dtype=float).reshape(-1)
        if len(p) != len(c) or len(p) == 0:
            raise ValueError("need matching, nonempty locations and values")
        hull = lower_hull(p, c)
        self.dim = p.shape[1]
        self.locations = p[hull.vertices]
        self.values = c[hull.vertices]
        self._hull = hull.reindexed()

    def __repr__(self):
        return f"EpiPolyhedral(dim={self.dim}, points={len(self.values)})"

    @cached_property
    def domain(self):
        return Polytope(self.locations)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), np.inf)
        inside = self.domain.contains(x)
        if not inside.any():
            return out
        h = self._hull
        if h.basis.shape[0] == 0:
            out[inside] = self.values.min()
            return out
        local = (x[inside] - h.origin) @ h.basis.T
        out[inside] = np.max(local @ h.gradients.T + h.intercepts, axis=1)
        return out

    def same_as(self, other, tol=1e-9):
        if self.dim != other.dim or len(self.values) != len(other.values):
            return False
        A = _sorted_rows(np.column_stack([self.locations, self.values]))
        B = _sorted_rows(np.column_stack([other.locations, other.values]))
        return bool(np.all(np.abs(A - B) <= tol * (1.0 + np.abs(A))))

    def to_dict(self):
        return {"type": "epi_points", "dim": self.dim,
                "points": [{"p": p.tolist(), "c": float(c)} for p, c in zip(self.locations, self.values)]}


class RadialProfile:
    """Radial function ``phi(|x|)`` on the ball of radius ``R`` (``+inf`` outside).

    ``phi`` is piecewise linear with breakpoints ``0 = r_0 < ... < r_k = R``,
    convex and nondecreasing. ``R = 0`` encodes the value ``phi(0)`` at the
    origin only.
    """

    def __init__(self, dim, breaks, values):
        r = np.asarray(breaks, dtype=float).reshape(-1)
        v = np.asarray(values, dtype=float).reshape(-1)
        if len(r) != len(v) or len(r) == 0:
            raise ValueError("breaks and values must have equal nonzero length")
        if r[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if np.any(np.diff(r) <= 0):
            raise ValueError("breakpoints must increase")
        slopes = np.diff(v) / np.diff(r)
        if np.any(slopes < -EPS) or np.any(np.diff(slopes) < -EPS * (1 + np.abs(slopes[1:]))):
            raise ValueError("profile must be convex and nondecreasing")
        # merge collinear segments
        if len(slopes) > 1:
            keep = np.ones(len(r), dtype=bool)
            same = np.abs(np.diff(slopes)) <= EPS * (1 + np.abs(slopes[1:]))
            keep[1:-1] = ~same
            r, v = r[keep], v[keep]
        self.dim = int(dim)
        self.breaks = r
        self.values = v

    def __repr__(self):
        return f"RadialProfile(dim={self.dim}, R={self.R:g}, segments={len(self.slopes)})"

    @property
    def R(self):
        return float(self.breaks[-1])

    @property
    def slopes(self):
        return np.diff(self.values) / np.diff(self.breaks)

    @property
    def lengths(self):
        return np.diff(self.breaks)

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.breaks, self.values)
        return np.where(r <= self.R * (1 + EPS) + EPS, out, np.inf)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.profile(np.linalg.norm(x, axis=1))

    @classmethod
    def from_segments(cls, dim, value0, lengths, slopes):
        lengths = np.asarray(lengths, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        keep = lengths > 0
        lengths, slopes = lengths[keep], slopes[keep]
        order = np.argsort(slopes, kind="stable")
        lengths, slopes = lengths[order], slopes[order]
        breaks = np.concatenate([[0.0], np.cumsum(lengths)])
        values = value0 + np.concatenate([[0.0], np.cumsum(lengths * slopes)])
        return cls(dim, breaks, values)

    def same_as(self, other, tol=1e-9):
        return (self.dim == other.dim and len(self.breaks) == len(other.breaks)
                and np.allclose(self.breaks, other.breaks, rtol=tol, atol=tol)
                and np.allclose(self.values, other.values, rtol=tol, atol=tol))

    def discretize(self, m=64):
        """Inscribed :class:`EpiPolyhedral` approximation on ``polytopal_ball(n, m)`` shells."""
        n = self.dim
        dirs = polytopal_ball(n, m).vertices
        pts = [np.zeros((1, n))]
        vals = [np.array([self.values[0]])]
        for r, v in zip(self.breaks[1:], self.values[1:]):
            pts.append(r * dirs)
            vals.append(np.full(len(dirs), v))
        return EpiPolyhedral(np.vstack(pts), np.concatenate(vals))

    def to_dict(self):
        return {"type": "radial", "dim": self.dim, "R": self.R,
                "breaks": self.breaks.tolist(), "values": self.values.tolist()}


def _sorted_rows(A):
    order = np.lexsort(np.round(A, 9).T[::-1])
    return A[order]


def conjugate(f):
    """Exact Legendre-Fenchel conjugate between the two finite representations."""
    if isinstance(f, MaxAffine):
        return EpiPolyhedral(f.slopes, -f.offsets)
    if isinstance(f, EpiPolyhedral):
        return MaxAffine(f.locations, -f.values)
    raise TypeError(f"cannot conjugate {type(f).__name__}")


def _check_dims(*fs):
    dims = {f.dim for f in fs}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


def inf_convolve(u, v):
    """Infimal convolution (epi-sum) ``u □ v``."""
    _check_dims(u, v)
    if isinstance(u, RadialProfile) and isinstance(v, RadialProfile):
        return RadialProfile.from_segments(
            u.dim, u.values[0] + v.values[0],
            np.concatenate([u.lengths, v.lengths]), np.concatenate([u.slopes, v.slopes]))
    if isinstance(u, RadialProfile) or isinstance(v, RadialProfile):
        raise TypeError("mixing radial and polyhedral arguments is not supported")
    p = (u.locations[:, None, :] + v.locations[None, :, :]).reshape(-1, u.dim)
    c = (u.values[:, None] + v.values[None, :]).reshape(-1)
    return EpiPolyhedral(p, c)


def epi_scale(lam, u):
    """Epi-multiplication ``(lam ⧆ u)(x) = lam * u(x / lam)``; ``lam = 0`` gives I_{o}."""
    if lam < 0:
        raise ValueError("epi-multiplication needs lam >= 0")
    if isinstance(u, RadialProfile):
        if lam == 0:
            return RadialProfile(u.dim, [0.0], [0.0])
        return RadialProfile(u.dim, lam * u.breaks, lam * u.values)
    if lam == 0:
        return point_indicator(u.dim)
    return EpiPolyhedral(lam * u.locations, lam * u.values)


def add(v, w):
    """Pointwise sum of two max-affine functions."""
    _check_dims(v, w)
    a = (v.slopes[:, None, :] + w.slopes[None, :, :]).reshape(-1, v.dim)
    b = (v.offsets[:, None] + w.offsets[None, :]).reshape(-1)
    return MaxAffine(a, b)


def rotate(f, rot):
    """Return ``f ∘ rot^{-1}``."""
    M = rot.matrix if isinstance(rot, Rotation) else np.asarray(rot, dtype=float)
    if M.shape[0] != f.dim:
        raise ValueError("rotation dimension does not match")
    if isinstance(f, MaxAffine):
        return MaxAffine(f.slopes @ M.T, f.offsets)
    if isinstance(f, EpiPolyhedral):
        return EpiPolyhedral(f.locations @ M.T, f.values)
    if isinstance(f, RadialProfile):
        return f
    if isinstance(f, Polytope):
        return f.transformed(M)
    raise TypeError(f"cannot rotate {type(f).__name__}")


def indicator(P):
    """Convex indicator I_P as an :class:`EpiPolyhedral`."""
    return EpiPolyhedral(P.vertices, np.zeros(len(P.vertices)))


def support_fn(P):
    """Support function h_P as a :class:`MaxAffine`."""
    return MaxAffine(P.vertices, np.zeros(len(P.vertices)))


def point_indicator(n, value=0.0):
    return EpiPolyhedral(np.zeros((1, n)), [value])


@lru_cache(maxsize=32)
def ball_indicator(n, m):
    """Indicator of ``polytopal_ball(n, m)``, cached."""
    return indicator(polytopal_ball(n, m))


def floor_body(K):
    """Lower boundary of ``K ⊂ R^n`` as a function on R^{n-1}."""
    if K.dim < 2:
        raise ValueError("floor needs n >= 2")
    v = K.vertices
    return EpiPolyhedral(v[:, :-1], v[:, -1])


def project(u, basis):
    """Projection function onto the subspace spanned by the rows of ``basis``.

    The result is expressed in the coordinates of that orthonormal basis.
    """
    E = np.atleast_2d(np.asarray(basis, dtype=float))
    if E.shape[1] != u.dim or E.shape[0] < 1:
        raise ValueError("basis must have rows in R^n")
    if np.max(np.abs(E @ E.T - np.eye(len(E)))) > 1e-10:
        raise ValueError("basis is not orthonormal")
    if isinstance(u, RadialProfile):
        return RadialProfile(len(E), u.breaks, u.values)
    return EpiPolyhedral(u.locations @ E.T, u.values)


def inf_deconvolve(u, v, tol=EPS):
    """Inf-deconvolution ``u ⋇ v``: the ``w`` with ``w □ v = u``.

    Raises :class:`NotDeconvolvable` when ``u* - v*`` is not convex.
    """
    _check_dims(u, v)
    if isinstance(u, RadialProfile) and isinstance(v, RadialProfile):
        return _radial_deconvolve(u, v, tol)
    us, vs = conjugate(u), conjugate(v)
    # cells of the common refinement of u* and v* are the vertices of the
    # lower hull of the pairwise sums; on each d = u* - v* is affine
    p = (u.locations[:, None, :] + v.locations[None, :, :]).reshape(-1, u.dim)
    c = (u.values[:, None] + v.values[None, :]).reshape(-1)
    active = lower_hull(p, c).vertices
    i, k = np.divmod(active, len(v.values))
    slopes = u.locations[i] - v.locations[k]
    offsets = -(u.values[i] - v.values[k])
    w_star = MaxAffine(slopes, offsets)
    # d is convex iff the max of its pieces reproduces it, i.e. w* + v* = u*
    if not add(w_star, vs).same_as(us, tol=max(tol, 1e-9)):
        raise NotDeconvolvable("not deconvolvable: conjugate difference is not convex")
    return conjugate(w_star)


def _radial_deconvolve(u, v, tol):
    lengths = list(u.lengths)
    slopes = list(u.slopes)
    for L, s in zip(v.lengths, v.slopes):
        match = [i for i, t in enumerate(slopes) if abs(t - s) <= tol * (1 + abs(s))]
        if not match or lengths[match[0]] < L - tol * (1 + L):
            raise NotDeconvolvable("not deconvolvable: profile slope segment missing")
        lengths[match[0]] = max(lengths[match[0]] - L, 0.0)
    lengths = np.array(lengths)
    lengths[lengths <= tol] = 0.0
    return RadialProfile.from_segments(u.dim, u.values[0] - v.values[0], lengths, slopes)


def cone_function(n, t, lam=1.0):
    """``lam ⧆ u_t``: profile ``t r`` on ``[0, lam]``."""
    if t < 0 or lam <= 0:
        raise ValueError("need t >= 0 and lam > 0")
    return RadialProfile(n, [0.0, lam], [0.0, t * lam])


def evaluation_grid(boxes, count=33, inflate=0.1):
    """Deterministic ``count^n`` grid over the union of bounding boxes, inflated by 10%."""
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    pad = inflate * np.maximum(hi - lo, 1e-6)
    axes = [np.linspace(a - d, b + d, count) for a, b, d in zip(lo, hi, pad)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in mesh])
