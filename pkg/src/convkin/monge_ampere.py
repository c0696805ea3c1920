"""Discrete Monge-Ampere measures and the radial / Hessian machinery.

For piecewise affine functions every Monge-Ampere type measure is atomic:
the conjugate measure of an :class:`~convkin.functions.EpiPolyhedral` has
one atom per cell of its lower envelope, located at the gradient of the
cell and weighted by the cell volume. Mixed measures come from polarization
over epi-sums.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np
from scipy import integrate

from ._hull import merge_atoms
from .functions import EpiPolyhedral, MaxAffine, RadialProfile, ball_indicator, epi_scale, inf_convolve
from .geometry import _group, kappa, polarization_terms

__all__ = [
    "AtomicMeasure",
    "TestFunction",
    "PiecewisePolynomial",
    "SmoothProfile",
    "ma",
    "conj_ma",
    "conj_ma_integral",
    "mixed_map",
    "mixed_map_integral",
    "map_j",
    "radial_measure",
    "radial_map_j_integral",
    "radial_mixed_integral",
    "integrate_radial",
    "double_integral_max",
    "double_integral_min_sphere",
    "r_transform",
    "ma_q_radial_integral",
    "beta_from_zeta",
    "elementary_symmetric",
    "mixed_discriminant",
    "hessian_integral_radial",
]


class AtomicMeasure:
    """Finite signed measure on R^n; coincident atoms are merged."""

    def __init__(self, dim, locations=None, masses=None, merge=True):
        self.dim = int(dim)
        x = np.zeros((0, self.dim)) if locations is None else np.asarray(locations, dtype=float).reshape(-1, self.dim)
        w = np.zeros(0) if masses is None else np.asarray(masses, dtype=float).reshape(-1)
        if merge and len(w):
            x, w = merge_atoms(x, w)
        self.locations = x
        self.masses = w

    def __repr__(self):
        return f"AtomicMeasure(dim={self.dim}, atoms={len(self.masses)}, mass={self.total_mass:.6g})"

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self):
        return float(self.masses.sum())

    @classmethod
    def dirac(cls, n, mass=1.0, at=None):
        loc = np.zeros((1, n)) if at is None else np.asarray(at, dtype=float).reshape(1, n)
        return cls(n, loc, [mass])

    def pruned(self, tol=1e-12):
        tv = float(np.abs(self.masses).sum())
        keep = np.abs(self.masses) > tol * max(tv, 1.0)
        return AtomicMeasure(self.dim, self.locations[keep], self.masses[keep], merge=False)

    def nonnegative(self, tol=1e-9):
        """Clamp small negative masses (rounding in polarization) to zero."""
        tv = max(float(np.abs(self.masses).sum()), 1.0)
        bad = self.masses < -tol * tv
        if bad.any():
            warnings.warn(f"{int(bad.sum())} atoms with negative mass clamped to zero", RuntimeWarning)
        return AtomicMeasure(self.dim, self.locations, np.maximum(self.masses, 0.0), merge=False).pruned()

    def pushforward(self, matrix):
        """Image measure under ``x -> matrix @ x``."""
        return AtomicMeasure(self.dim, self.locations @ np.asarray(matrix).T, self.masses)

    def same_as(self, other, tol=1e-9):
        a, b = self.pruned(), other.pruned()
        if a.dim != b.dim or len(a) != len(b):
            return False
        if len(a) == 0:
            return True
        A = np.column_stack([a.locations, a.masses])
        B = np.column_stack([b.locations, b.masses])
        A = A[np.lexsort(np.round(A[:, :-1], 7).T[::-1])]
        B = B[np.lexsort(np.round(B[:, :-1], 7).T[::-1])]
        return bool(np.all(np.abs(A - B) <= tol * (1.0 + np.abs(A))))

    def __add__(self, other):
        return AtomicMeasure(self.dim, np.vstack([self.locations, other.locations]),
                             np.concatenate([self.masses, other.masses]))

    def to_dict(self):
        return {"dim": self.dim,
                "atoms": [{"x": x.tolist(), "mass": float(w)} for x, w in zip(self.locations, self.masses)]}

    @classmethod
    def from_dict(cls, data):
        n = int(data["dim"])
        x = np.array([a["x"] for a in data["atoms"]], dtype=float).reshape(-1, n)
        return cls(n, x, [a["mass"] for a in data["atoms"]], merge=False)


class TestFunction:
    """Continuous piecewise linear function on ``[0, inf)``.

    Given by ``breaks`` ``0 = r_0 < ... < r_k`` and the values there; zero
    beyond ``r_k``. With ``bounded_domain`` the function lives on
    ``[0, r_k]`` only (densities on ``[0, 1]``) and the final value need not
    vanish.
    """

    __test__ = False  # not a pytest class

    def __init__(self, breaks, values, bounded_domain=False):
        r = np.asarray(breaks, dtype=float).reshape(-1)
        v = np.asarray(values, dtype=float).reshape(-1)
        if len(r) != len(v) or len(r) < 1:
            raise ValueError("breaks and values must have equal nonzero length")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("breaks must start at 0 and increase")
        if not bounded_domain and v[-1] != 0.0:
            raise ValueError("compact support requires the last value to be 0")
        self.breaks = r
        self.values = v
        self.bounded_domain = bounded_domain

    def __repr__(self):
        return f"TestFunction(breaks={self.breaks.tolist()}, values={self.values.tolist()})"

    @property
    def support_bound(self):
        return float(self.breaks[-1])

    @property
    def nonnegative(self):
        return bool(np.all(self.values >= 0))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.breaks, self.values)
        if self.bounded_domain:
            return out
        return np.where(r > self.breaks[-1], 0.0, out)

    @classmethod
    def hat(cls, peak, support):
        """Linear decay from ``peak`` at 0 to 0 at ``support``."""
        return cls([0.0, support], [peak, 0.0])

    @classmethod
    def constant_on_unit(cls, value=1.0):
        return cls([0.0, 1.0], [value, value], bounded_domain=True)

    def segments(self):
        """(lo, hi, a, b) with the function equal to ``a + b r`` on [lo, hi]."""
        r, v = self.breaks, self.values
        for lo, hi, f0, f1 in zip(r[:-1], r[1:], v[:-1], v[1:]):
            b = (f1 - f0) / (hi - lo)
            yield lo, hi, f0 - b * lo, b

    def to_dict(self):
        out = {"breaks": self.breaks.tolist(), "values": self.values.tolist()}
        if self.bounded_domain:
            out["bounded_domain"] = True
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(data["breaks"], data["values"], bool(data.get("bounded_domain", False)))


# --------------------------------------------------------------------------
# atomic measures of polyhedral functions


def ma(v):
    """Monge-Ampere measure of a max-affine function.

    One atom per full-dimensional cell of the regular subdivision of the
    slopes, placed where the pieces of the cell are jointly active.
    """
    if not isinstance(v, MaxAffine):
        raise TypeError("ma expects a MaxAffine")
    return _cells_measure(v._hull, v.dim)


def conj_ma(u):
    """Conjugate Monge-Ampere measure MA*(u) = MA(u*)."""
    if isinstance(u, RadialProfile):
        return radial_measure(u, u.dim)
    if not isinstance(u, EpiPolyhedral):
        raise TypeError("conj_ma expects an EpiPolyhedral")
    return _cells_measure(u._hull, u.dim)


def _cells_measure(hull, n):
    if not hull.full or len(hull.volumes) == 0:
        return AtomicMeasure(n)
    return AtomicMeasure(n, hull.global_gradients(), hull.volumes)


def conj_ma_integral(u, fn):
    """∫ fn(|y|) dMA*(u; y) without building the merged measure."""
    h = u._hull
    if not h.full or len(h.volumes) == 0:
        return 0.0
    g = h.global_gradients()
    return float(np.dot(h.volumes, fn(np.linalg.norm(g, axis=1))))


def _combination(distinct, counts):
    w = None
    for idx, c in counts.items():
        term = distinct[idx] if c == 1 else epi_scale(c, distinct[idx])
        w = term if w is None else inf_convolve(w, term)
    return w


#: generic direction used to break ties when a crossing falls on a ray
_TIE = np.array([np.cos(1.0), np.sin(1.0)])


def _is_flat_polygon(f):
    return (isinstance(f, EpiPolyhedral) and f.dim == 2 and np.ptp(f.values) == 0.0
            and f._hull.full and len(f.values) >= 3)


def _planar_eligible(u):
    """Full 2-D function whose minimum sits at a single vertex, by a margin."""
    if not isinstance(u, EpiPolyhedral) or u.dim != 2 or not u._hull.full or len(u.values) < 3:
        return False
    c = np.sort(u.values)
    return c[1] - c[0] > 1e-9 * (1.0 + np.abs(c).max())


def _dual_edges(u):
    """Edges of the subdivision of ``u`` seen from the conjugate side.

    Returns ``(start, direction, bounded, jump)``: an interior edge between
    cells with gradients ``g1, g2`` gives the segment ``g1 + t (g2 - g1)``,
    ``t in [0, 1]``; a domain boundary edge gives the ray ``g + t nu``,
    ``t >= 0``, along its outer normal. ``jump`` is the primal edge vector.
    """
    h = u._hull
    p = u.locations
    simp = h.simplices
    g = h.gradients
    tri = np.repeat(np.arange(len(simp)), 3)
    e = np.stack([simp[:, [0, 1, 2]].ravel(), simp[:, [1, 2, 0]].ravel()], axis=1)
    opp = simp[:, [2, 0, 1]].ravel()
    e.sort(axis=1)
    _, inv, cnt = np.unique(e, axis=0, return_inverse=True, return_counts=True)
    grouped = np.argsort(inv.ravel(), kind="stable")
    first = grouped[np.cumsum(cnt) - cnt]
    second = grouped[np.minimum(np.cumsum(cnt) - cnt + 1, len(grouped) - 1)]
    a, b = e[first, 0], e[first, 1]
    jump = p[b] - p[a]
    interior = cnt == 2
    g1 = g[tri[first]]
    g2 = g[tri[second]]
    scale = 1.0 + np.abs(g).max()
    flat = interior & (np.max(np.abs(g2 - g1), axis=1) <= 1e-12 * scale)  # inside a planar cell
    nu = np.column_stack([jump[:, 1], -jump[:, 0]])
    inward = np.einsum("ij,ij->i", nu, p[opp[first]] - p[a]) > 0
    nu[inward] = -nu[inward]
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    keep = ~flat
    starts = g1[keep]
    dirs = np.where(interior[:, None], g2 - g1, nu)[keep]
    return starts, dirs, interior[keep], jump[keep]


def _planar_mixed_polygon(u, P):
    """MA*(u, I_P) in the plane as crossings of the two dual complexes.

    ``MA*(u, I_P) = MA(u*, h_P)``; its atoms are the points where an edge of
    the complex of ``u*`` crosses a ray of the normal fan of ``P``, each with
    mass ``|det(jump_edge, jump_ray)| / 2``. Crossings that land exactly on a
    ray are attributed as if the fan were shifted along a fixed generic
    direction, which keeps masses exact.
    """
    q = P.locations
    q = q[np.argsort(np.arctan2(*(q - q.mean(axis=0)).T[::-1]))]
    q_edge = np.roll(q, -1, axis=0) - q
    n_out = np.column_stack([q_edge[:, 1], -q_edge[:, 0]])  # outer normals (ccw order)
    perp = np.column_stack([-n_out[:, 1], n_out[:, 0]])
    tie = -np.sign(perp @ _TIE)

    g0, d, bounded, jump = _dual_edges(u)
    if len(g0) == 0:
        return AtomicMeasure(2)
    tol = 1e-12 * (1.0 + np.abs(g0).max())
    s0 = g0 @ perp.T  # (E, m): signed offset of the start from each ray line
    ds = d @ perp.T
    side0 = np.where(np.abs(s0) <= tol * np.linalg.norm(perp, axis=1), tie, np.sign(s0))
    end = g0 + d
    s1 = end @ perp.T
    side1_seg = np.where(np.abs(s1) <= tol * np.linalg.norm(perp, axis=1), tie, np.sign(s1))
    side1_ray = np.where(ds == 0.0, side0, np.sign(ds))
    side1 = np.where(bounded[:, None], side1_seg, side1_ray)
    cross = side0 != side1
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cross, -s0 / ds, 0.0)
    if bounded.any():
        t[bounded] = np.clip(t[bounded], 0.0, 1.0)
    t = np.maximum(t, 0.0)
    ei, ki = np.nonzero(cross)
    y = g0[ei] + t[ei, ki, None] * d[ei]
    on_ray = np.einsum("ij,ij->i", y, n_out[ki]) > 0.0
    ei, ki, y = ei[on_ray], ki[on_ray], y[on_ray]
    mass = 0.5 * np.abs(jump[ei, 0] * q_edge[ki, 1] - jump[ei, 1] * q_edge[ki, 0])
    return AtomicMeasure(2, y, mass, merge=False)


def _planar_pair(distinct, keys):
    """(u, P) when the arguments are one eligible function and one polygon indicator."""
    if len(distinct) != 2 or len(keys) != 2 or distinct[0].dim != 2:
        return None
    a, b = distinct
    if _is_flat_polygon(b) and _planar_eligible(a):
        return a, b
    if _is_flat_polygon(a) and _planar_eligible(b):
        return b, a
    return None


def _check_arity(args):
    if not args:
        raise ValueError("need n functions")
    n = args[0].dim
    if len(args) != n or any(a.dim != n for a in args):
        raise ValueError(f"mixed measure in R^{n} needs exactly {n} functions of dimension {n}")
    return n


def mixed_map(args, fast=True):
    """Conjugate mixed Monge-Ampere measure MA*(u_1, ..., u_n) by polarization.

    Identical arguments (same object) are grouped so repeated entries cost
    one epi-multiplication instead of repeated epi-sums. In the plane, a
    function paired with a polygon indicator is handled by the exact crossing
    construction unless ``fast`` is False.
    """
    n = _check_arity(args)
    distinct, keys = _group(args)
    if len(distinct) == 1:
        return conj_ma(distinct[0])
    pair = _planar_pair(distinct, keys) if fast else None
    if pair is not None:
        mu = _planar_mixed_polygon(*pair)
        return AtomicMeasure(2, mu.locations, mu.masses)
    locs, masses = [], []
    for counts, coeff in polarization_terms(keys):
        mu = conj_ma(_combination(distinct, counts))
        locs.append(mu.locations)
        masses.append(coeff * mu.masses)
    return AtomicMeasure(n, np.vstack(locs), np.concatenate(masses)).nonnegative()


def mixed_map_integral(args, fn, fast=True):
    """∫ fn(|y|) dMA*(u_1, ..., u_n; y), polarizing the integrals directly."""
    n = _check_arity(args)
    if all(isinstance(a, RadialProfile) for a in args):
        return radial_mixed_integral(list(args), n, fn)
    distinct, keys = _group(args)
    if len(distinct) == 1:
        return conj_ma_integral(distinct[0], fn)
    pair = _planar_pair(distinct, keys) if fast else None
    if pair is not None:
        return integrate_radial(_planar_mixed_polygon(*pair), fn)
    total = 0.0
    for counts, coeff in polarization_terms(keys):
        total += coeff * conj_ma_integral(_combination(distinct, counts), fn)
    return total


def _map_j_args(u, j, m):
    n = u.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    return [u] * j + [ball_indicator(n, m)] * (n - j)


def map_j(u, j, m=128):
    """MA*_j(u) = MA*(u[j], I_B[n-j]) with the ball replaced by ``polytopal_ball(n, m)``.

    For a :class:`RadialProfile` the exact ball is used and the returned
    measure is the radial representative from :func:`radial_measure`.
    """
    if isinstance(u, RadialProfile):
        return radial_measure(u, j)
    return mixed_map(_map_j_args(u, j, m))


def map_j_integral(u, j, fn, m=128):
    if isinstance(u, RadialProfile):
        return radial_map_j_integral(u, j, fn)
    return mixed_map_integral(_map_j_args(u, j, m), fn)


# --------------------------------------------------------------------------
# radial path


def radial_measure(u, j):
    """Radial representative of MA*_j(u) for a radial profile.

    Only ``|y|`` matters for the rotation invariant integrands this is used
    with, so the measure is stored with its atoms on the ray through ``e_1``:
    slope ``s_i`` of segment ``[r_{i-1}, r_i]`` carries mass
    ``kappa_n (r_i^j - r_{i-1}^j)``.
    """
    n = u.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    k = kappa(n)
    if j == 0:
        return AtomicMeasure.dirac(n, k)
    r = u.breaks
    masses = k * (r[1:] ** j - r[:-1] ** j)
    locs = np.zeros((len(masses), n))
    locs[:, 0] = u.slopes
    return AtomicMeasure(n, locs, masses).pruned()


def radial_map_j_integral(u, j, alpha):
    """∫ alpha(|y|) dMA*_j(u; y) for a radial piecewise-linear profile.

    Equals ``kappa_n j ∫_0^R alpha(phi'(r)) r^(j-1) dr``; since ``phi'`` is
    constant per segment, each segment contributes
    ``alpha(s_i) (r_i^j - r_{i-1}^j)`` exactly.
    """
    n = u.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    if j == 0:
        return kappa(n) * float(alpha(0.0))
    r = u.breaks
    if len(r) < 2:
        return 0.0
    a = np.asarray(alpha(u.slopes), dtype=float)
    return kappa(n) * float(np.dot(a, r[1:] ** j - r[:-1] ** j))


def radial_mixed_integral(us, k, alpha):
    """∫ alpha(|y|) dMA*(u_1, ..., u_k, I_B[n-k]; y) for radial ``u_i``.

    Polarization of the degree-``k`` polynomial ``u -> ∫ alpha dMA*_k(u)``.
    """
    if len(us) != k:
        raise ValueError("need exactly k functions")
    if k == 0:
        raise ValueError("k must be positive")
    distinct, keys = _group(us)
    total = 0.0
    for counts, coeff in polarization_terms(keys):
        total += coeff * radial_map_j_integral(_combination(distinct, counts), k, alpha)
    return total


# --------------------------------------------------------------------------
# integration against atomic measures


def integrate_radial(mu, alpha):
    """∫ alpha(|x|) dmu(x)."""
    if len(mu) == 0:
        return 0.0
    return float(np.dot(mu.masses, alpha(np.linalg.norm(mu.locations, axis=1))))


def double_integral_max(mu, nu, alpha):
    """∫∫ alpha(max{|x|, |y|}) dmu(x) dnu(y)."""
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    if len(mu) == 0 or len(nu) == 0:
        return 0.0
    a = np.linalg.norm(mu.locations, axis=1)
    b = np.linalg.norm(nu.locations, axis=1)
    vals = alpha(np.maximum(a[:, None], b[None, :]))
    return float(mu.masses @ vals @ nu.masses)


def double_integral_min_sphere(mu, nu, beta):
    """∫∫ |w_n| |z_n| beta(min{|w_n|, |z_n|}) dmu(z) dnu(w) for sphere measures."""
    if mu.dim != nu.dim:
        raise ValueError("dimension mismatch")
    if len(mu) == 0 or len(nu) == 0:
        return 0.0
    a = np.abs(mu.normals[:, -1])
    b = np.abs(nu.normals[:, -1])
    vals = a[:, None] * b[None, :] * beta(np.minimum(a[:, None], b[None, :]))
    return float(mu.masses @ vals @ nu.masses)


# --------------------------------------------------------------------------
# R-transform and the q-density


class PiecewisePolynomial:
    """Callable piecewise polynomial on ``[0, inf)``, zero past the last break."""

    def __init__(self, breaks, polys):
        self.breaks = np.asarray(breaks, dtype=float)
        self.polys = list(polys)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for lo, hi, p in zip(self.breaks[:-1], self.breaks[1:], self.polys):
            sel = (s >= lo) & (s <= hi)
            out = np.where(sel, p(s), out)
        return out


def r_transform(zeta, m):
    """``R^m zeta(s) = s^m zeta(s) + m ∫_s^inf t^(m-1) zeta(t) dt``; ``R^0 = id``.

    On a segment where ``zeta(t) = a + b t`` the transform is
    ``b s^(m+1)/(m+1) + K`` with ``K`` fixed by continuity of the tail.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    P = np.polynomial.Polynomial
    segs = list(zeta.segments())
    if m == 0:
        return PiecewisePolynomial(zeta.breaks, [P([a, b]) for _, _, a, b in segs])
    polys = [None] * len(segs)
    tail = 0.0  # m ∫_{hi}^inf t^(m-1) zeta(t) dt
    for i in range(len(segs) - 1, -1, -1):
        lo, hi, a, b = segs[i]
        # at s = hi: R(hi) = hi^m zeta(hi) + tail
        at_hi = hi ** m * (a + b * hi) + tail
        K = at_hi - b * hi ** (m + 1) / (m + 1)
        coef = np.zeros(m + 2)
        coef[0] = K
        coef[m + 1] = b / (m + 1)
        polys[i] = P(coef)
        tail += a * (hi ** m - lo ** m) + b * m / (m + 1) * (hi ** (m + 1) - lo ** (m + 1))
    return PiecewisePolynomial(zeta.breaks, polys)


def _moment(zeta, power, lo=0.0, hi=np.inf):
    """∫_lo^hi zeta(r) r^power dr, exact per linear segment."""
    total = 0.0
    for a_lo, a_hi, a, b in zeta.segments():
        x0, x1 = max(a_lo, lo), min(a_hi, hi)
        if x1 <= x0:
            continue
        F = np.polynomial.Polynomial([0.0] * power + [a, b]).integ()
        total += F(x1) - F(x0)
    return float(total)


def ma_q_radial_integral(n, j, zeta, cutoff=np.inf):
    """∫_{|y| <= cutoff} zeta(|y|) dMA_{n-j}(q; y) for ``q = |x|^2/2``.

    The measure has density ``(n-j)/n |y|^(-j)`` off the origin for
    ``j < n`` and is ``kappa_n delta_0`` for ``j = n``.
    """
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    if j == n:
        return kappa(n) * float(zeta(0.0))
    return (n - j) * kappa(n) * _moment(zeta, n - 1 - j, 0.0, cutoff)


def beta_from_zeta(zeta, n, j):
    """Radial density ``beta(s) = (1/kappa_n) ∫ zeta(max{s, |y|}) dMA_{n-j}(q; y)``."""
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    if j == n:
        return zeta
    kn = kappa(n)

    def beta(s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s_arr)
        for i, x in enumerate(s_arr):
            inner = kn * x ** (n - j)  # MA_{n-j}(q; xB), no atom at o
            outer = (n - j) * kn * _moment(zeta, n - 1 - j, x, np.inf)
            out[i] = (float(zeta(x)) * inner + outer) / kn
        return out if np.ndim(s) else float(out[0])

    return beta


# --------------------------------------------------------------------------
# Hessian side


def _check_symmetric(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or np.max(np.abs(A - A.T)) > 1e-12 * (1 + np.abs(A).max()):
        raise ValueError("matrix must be square and symmetric")
    return A


def elementary_symmetric(A, j):
    """``[A]_j``: j-th elementary symmetric function of the eigenvalues."""
    A = _check_symmetric(A)
    n = len(A)
    if not 0 <= j <= n:
        raise ValueError("j out of range")
    return float((-1) ** j * np.poly(A)[j])


def mixed_discriminant(mats):
    """Mixed discriminant D(A_1, ..., A_n), polarizing the determinant."""
    mats = [_check_symmetric(A) for A in mats]
    n = len(mats[0])
    if len(mats) != n:
        raise ValueError("need n matrices of size n")
    distinct, keys = _group(mats)
    total = 0.0
    for counts, coeff in polarization_terms(keys):
        S = sum(c * distinct[i] for i, c in counts.items())
        total += coeff * np.linalg.det(S)
    return float(total)


@dataclass(frozen=True)
class SmoothProfile:
    """Radial C^2 profile ``psi`` with its first two derivatives."""

    value: Callable
    d1: Callable
    d2: Callable

    @classmethod
    def power(cls, p, c=1.0):
        """``c r^p``."""
        return cls(lambda r: c * r ** p, lambda r: c * p * r ** (p - 1), lambda r: c * p * (p - 1) * r ** (p - 2))

    @classmethod
    def quadratic(cls):
        return cls.power(2, 0.5)

    def hessian_eigenvalues(self, r, n):
        """``psi''(r)`` once and ``psi'(r)/r`` with multiplicity ``n-1``."""
        return np.array([self.d2(r)] + [self.d1(r) / r] * (n - 1))


def hessian_integral_radial(psi, zeta, n, j, rtol=1e-8):
    """∫ zeta(|x|) [D^2 v(x)]_j dx for ``v(x) = psi(|x|)``.

    Reduces to ``n kappa_n ∫ zeta(r) [C(n-1,j)(psi'/r)^j + C(n-1,j-1)(psi'/r)^(j-1) psi''] r^(n-1) dr``.
    """
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")

    def integrand(r):
        if j == 0:
            bracket = 1.0
        else:
            g = psi.d1(r) / r
            bracket = comb(n - 1, j) * g ** j + comb(n - 1, j - 1) * g ** (j - 1) * psi.d2(r)
        return float(zeta(r)) * bracket * r ** (n - 1)

    pts = [b for b in zeta.breaks[1:-1]]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(integrand, 0.0, zeta.support_bound, points=pts or None,
                                    epsrel=rtol, epsabs=0.0, limit=200)
        except integrate.IntegrationWarning as exc:
            raise RuntimeError(f"quadrature did not converge: {exc}") from exc
    return n * kappa(n) * val
