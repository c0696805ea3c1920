"""Polyhedral convex geometry: hulls, Minkowski sums, volumes, area
measures, mixed and intrinsic volumes, and Haar rotations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import comb, factorial, pi

import numpy as np
from scipy.spatial import ConvexHull

from ._hull import EPS, affine_frame, kvolume, merge_atoms

__all__ = [
    "Polytope",
    "Facet",
    "Rotation",
    "AtomicSphereMeasure",
    "kappa",
    "convex_hull",
    "minkowski_sum",
    "volume",
    "polytopal_ball",
    "polytopal_disk",
    "sample_rotation",
    "sample_rotations",
    "surface_area_measure",
    "mixed_volume",
    "mixed_area_measure",
    "intrinsic_volume",
    "polarization_terms",
]


def kappa(i):
    """Volume of the ``i``-dimensional Euclidean unit ball."""
    if i < 0:
        raise ValueError("dimension must be nonnegative")
    # kappa_i = 2 pi / i * kappa_{i-2}, exact in the first two steps
    val = 1.0 if i % 2 == 0 else 2.0
    for d in range(2 + i % 2, i + 1, 2):
        val *= 2.0 * pi / d
    return val


@dataclass(frozen=True)
class Facet:
    normal: np.ndarray
    offset: float
    indices: tuple


class Polytope:
    """Convex hull of finitely many points of R^n.

    Non-extreme input points are discarded, so ``vertices`` holds exactly the
    extreme points. Polytopes of lower affine dimension are allowed; their
    :attr:`affine_dim` is smaller than :attr:`dim` and they carry no facets.
    """

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            raise ValueError("empty point set")
        if pts.shape[1] > 4:
            raise ValueError("dimension above 4 is not supported")
        self.dim = pts.shape[1]
        origin, basis, coords = affine_frame(pts)
        self.affine_dim = basis.shape[0]
        self._origin, self._basis = origin, basis
        k = self.affine_dim
        self._hull = None
        if k == 0:
            keep = np.array([0])
        elif k == 1:
            t = coords[:, 0]
            keep = np.unique([int(np.argmin(t)), int(np.argmax(t))])
        else:
            base = pts if k == self.dim else coords
            hull = ConvexHull(base)
            keep = np.sort(hull.vertices)
            if k == self.dim:
                self._hull = hull
        self.vertices = pts[keep]
        self.vertices.setflags(write=False)
        if self._hull is not None:
            remap = -np.ones(len(pts), dtype=int)
            remap[keep] = np.arange(len(keep))
            self._simplices = remap[self._hull.simplices]
            self._equations = self._hull.equations
            self._hull = None

    def __repr__(self):
        return f"Polytope(dim={self.dim}, affine_dim={self.affine_dim}, nvert={len(self.vertices)})"

    def __len__(self):
        return len(self.vertices)

    @property
    def full(self):
        return self.affine_dim == self.dim

    @cached_property
    def facets(self):
        """Facets as (outer unit normal, offset, vertex indices)."""
        if not self.full:
            return []
        if self.dim == 1:
            lo, hi = self.vertices[:, 0].argmin(), self.vertices[:, 0].argmax()
            return [Facet(np.array([-1.0]), -float(self.vertices[lo, 0]), (int(lo),)),
                    Facet(np.array([1.0]), float(self.vertices[hi, 0]), (int(hi),))]
        labels, first = self._facet_labels
        rows = self._equations[first]
        normals = rows[:, :-1] / np.linalg.norm(rows[:, :-1], axis=1, keepdims=True)
        anchor = self.vertices[self._simplices[first, 0]]
        offsets = np.einsum("ij,ij->i", anchor, normals)
        support = self.vertices @ normals.T
        on = np.abs(support - offsets) <= EPS * np.maximum(1.0, np.abs(offsets))
        return [Facet(normals[i], float(offsets[i]), tuple(int(v) for v in np.nonzero(on[:, i])[0]))
                for i in range(len(first))]

    @cached_property
    def _facet_labels(self):
        # group coplanar hull simplices; facets are numbered by first appearance
        keys = np.round(self._equations / EPS).astype(np.int64)
        _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        return rank[inv.ravel()], first[order]

    @cached_property
    def _facet_areas(self):
        if self.dim == 1:
            return np.ones(len(self.facets))
        if not self.full:
            return np.zeros(0)
        labels, first = self._facet_labels
        v = self.vertices[self._simplices]
        edges = v[:, 1:, :] - v[:, :1, :]
        gram = np.einsum("sik,sjk->sij", edges, edges)
        vols = np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / factorial(self.dim - 1)
        return np.bincount(labels, weights=vols, minlength=len(first))

    @cached_property
    def volume(self):
        if not self.full:
            return 0.0
        if self.dim == 1:
            return float(np.ptp(self.vertices[:, 0]))
        # fan from an interior point over the triangulated boundary
        center = self.vertices.mean(axis=0)
        v = self.vertices[self._simplices] - center
        return float(np.abs(np.linalg.det(v)).sum() / factorial(self.dim))

    def support_value(self, direction):
        return float(np.max(self.vertices @ np.asarray(direction, dtype=float)))

    def contains(self, x, tol=EPS):
        """Membership test for points ``x`` of shape (N, n)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scale = 1.0 + float(np.abs(self.vertices).max())
        if self.full:
            if self.dim == 1:
                lo, hi = self.vertices[:, 0].min(), self.vertices[:, 0].max()
                return (x[:, 0] >= lo - tol * scale) & (x[:, 0] <= hi + tol * scale)
            eq = self._equations
            return np.all(x @ eq[:, :-1].T + eq[:, -1] <= tol * scale, axis=1)
        # lower-dimensional: distance to the affine hull, then a hull test in the frame
        rel = x - self._origin
        local = rel @ self._basis.T
        off = np.linalg.norm(rel - local @ self._basis, axis=1) <= tol * scale
        if self.affine_dim == 0:
            return off
        sub = Polytope((self.vertices - self._origin) @ self._basis.T)
        return off & sub.contains(local, tol)

    def transformed(self, matrix):
        """Image under the linear map ``x -> matrix @ x``."""
        return Polytope(self.vertices @ np.asarray(matrix, dtype=float).T)

    def translated(self, shift):
        return Polytope(self.vertices + np.asarray(shift, dtype=float))

    def scaled(self, factor):
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        return Polytope(self.vertices * float(factor))

    def to_dict(self):
        return {"dim": self.dim, "vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data):
        pts = np.asarray(data["vertices"], dtype=float).reshape(-1, int(data["dim"]))
        return cls(pts)


def convex_hull(points):
    """Polytope spanned by ``points`` (non-extreme points are pruned)."""
    return Polytope(points)


def minkowski_sum(P, Q):
    """Minkowski sum of two polytopes of the same dimension."""
    if P.dim != Q.dim:
        raise ValueError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    sums = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return Polytope(sums)


def volume(P):
    """Lebesgue measure of ``P`` (zero for lower-dimensional polytopes)."""
    return P.volume


def _sphere_points(n, m):
    if n == 3:
        i = np.arange(m) + 0.5
        z = 1.0 - 2.0 * i / m
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(m)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    if n == 4:
        # Kronecker sequence pushed through the uniform-quaternion map
        g = 1.0
        for _ in range(30):
            g = (1.0 + g) ** (1.0 / 4.0)
        a = np.array([1 / g, 1 / g ** 2, 1 / g ** 3])
        u = np.mod(0.5 + np.outer(np.arange(1, m + 1), a), 1.0)
        s1, s2 = np.sqrt(1.0 - u[:, 0]), np.sqrt(u[:, 0])
        t1, t2 = 2 * np.pi * u[:, 1], 2 * np.pi * u[:, 2]
        return np.column_stack([s1 * np.sin(t1), s1 * np.cos(t1), s2 * np.sin(t2), s2 * np.cos(t2)])
    raise ValueError(f"unsupported dimension {n}")


@lru_cache(maxsize=32)
def polytopal_ball(n, m):
    """Deterministic inscribed polytope approximating the unit ball B^n.

    ``n = 1`` gives the exact segment, ``n = 2`` the regular ``m``-gon with a
    vertex at ``e_1`` and ``n >= 3`` the hull of ``m`` low-discrepancy points
    on the sphere.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    if n == 1:
        return Polytope([[-1.0], [1.0]])
    if m < n + 1:
        raise ValueError(f"resolution m={m} too small for dimension {n}")
    if n == 2:
        t = 2 * np.pi * np.arange(m) / m
        return Polytope(np.column_stack([np.cos(t), np.sin(t)]))
    return Polytope(_sphere_points(n, m))


@lru_cache(maxsize=32)
def polytopal_disk(n, m):
    """Polytopal version of the (n-1)-ball B^n ∩ e_n^⊥, embedded in R^n."""
    if n < 2:
        raise ValueError("need n >= 2")
    base = polytopal_ball(n - 1, m)
    pts = np.column_stack([base.vertices, np.zeros(len(base.vertices))])
    return Polytope(pts)


@dataclass(frozen=True)
class Rotation:
    """Orthogonal matrix; determinant +1 unless ``reflection`` is set."""

    matrix: np.ndarray
    reflection: bool = False

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", M)
        if np.max(np.abs(M.T @ M - np.eye(len(M)))) > 1e-10:
            raise ValueError("matrix is not orthogonal")
        det = np.linalg.det(M)
        if not self.reflection and det < 0:
            raise ValueError("determinant -1 requires the reflection flag")

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def inverse(self):
        return Rotation(self.matrix.T, self.reflection)

    def __matmul__(self, other):
        if isinstance(other, Rotation):
            return Rotation(self.matrix @ other.matrix, self.reflection != other.reflection)
        return self.matrix @ other

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))


def sample_rotation(n, rng):
    """Haar-distributed element of SO(n).

    QR of a Gaussian matrix with the diagonal sign correction, followed by a
    column flip when the determinant comes out negative.
    """
    if n == 1:
        return Rotation(np.eye(1))
    z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return Rotation(q)


def sample_rotations(n, count, seed):
    """``count`` Haar rotations from a fresh generator seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    return [sample_rotation(n, rng) for _ in range(count)]


class AtomicSphereMeasure:
    """Finite signed measure on the unit sphere."""

    def __init__(self, dim, normals=None, masses=None, merge=True):
        self.dim = int(dim)
        z = np.zeros((0, self.dim)) if normals is None else np.asarray(normals, dtype=float).reshape(-1, self.dim)
        w = np.zeros(0) if masses is None else np.asarray(masses, dtype=float).reshape(-1)
        if len(z):
            norms = np.linalg.norm(z, axis=1)
            z = z / norms[:, None]
        if merge and len(z):
            z, w = merge_atoms(z, w)
            z = z / np.linalg.norm(z, axis=1)[:, None]
        self.normals = z
        self.masses = w

    def __len__(self):
        return len(self.masses)

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def integrate(self, fn):
        """∫ fn dμ for a vectorised ``fn`` of shape (N, n) -> (N,)."""
        if len(self.masses) == 0:
            return 0.0
        return float(np.dot(self.masses, fn(self.normals)))

    def __add__(self, other):
        return AtomicSphereMeasure(self.dim, np.vstack([self.normals, other.normals]),
                                   np.concatenate([self.masses, other.masses]))

    def scaled(self, c):
        return AtomicSphereMeasure(self.dim, self.normals, self.masses * c, merge=False)

    def pruned(self, tol=1e-12):
        """Drop atoms whose mass vanishes up to ``tol`` times the total variation."""
        tv = np.abs(self.masses).sum()
        keep = np.abs(self.masses) > tol * max(tv, 1.0)
        return AtomicSphereMeasure(self.dim, self.normals[keep], self.masses[keep], merge=False)

    def to_dict(self):
        return {"dim": self.dim,
                "atoms": [{"z": z.tolist(), "mass": float(w)} for z, w in zip(self.normals, self.masses)]}

    @classmethod
    def from_dict(cls, data):
        atoms = data["atoms"]
        z = [a["z"] for a in atoms]
        w = [a["mass"] for a in atoms]
        return cls(data["dim"], np.array(z).reshape(-1, data["dim"]), w, merge=False)


def surface_area_measure(P):
    """Surface area measure S_{n-1}(P, .) as atoms at the facet normals."""
    n = P.dim
    if P.full:
        if not P.facets:
            return AtomicSphereMeasure(n)
        normals = np.array([f.normal for f in P.facets])
        return AtomicSphereMeasure(n, normals, P._facet_areas)
    if P.affine_dim == n - 1:
        # both sides of a flat body
        normal = _complement_normal(P._basis)
        area = kvolume((P.vertices - P._origin) @ P._basis.T) if n > 1 else 1.0
        return AtomicSphereMeasure(n, np.vstack([normal, -normal]), [area, area])
    return AtomicSphereMeasure(n)


def _complement_normal(basis):
    n = basis.shape[1]
    if basis.shape[0] == 0:
        return np.ones(n) / np.sqrt(n)
    _, _, vt = np.linalg.svd(basis)
    return vt[-1]


def polarization_terms(items):
    """Signed sub-multiset terms of the polarization formula.

    ``items`` is a list of hashable keys, possibly repeated. Yields
    ``(counts, coefficient)`` where ``counts`` maps each distinct key to a
    multiplicity and the coefficients realise

        F(x_1, ..., x_k) = (1/k!) sum_{S nonempty} (-1)^{k-|S|} P(sum_{i in S} x_i)

    for a homogeneous polynomial P of degree k. Terms are produced in a fixed
    order.
    """
    keys = []
    mult = []
    for it in items:
        if it in keys:
            mult[keys.index(it)] += 1
        else:
            keys.append(it)
            mult.append(1)
    k = len(items)
    for counts in itertools.product(*[range(c + 1) for c in mult]):
        size = sum(counts)
        if size == 0:
            continue
        coeff = (-1) ** (k - size) / factorial(k)
        for c, mtot in zip(counts, mult):
            coeff *= comb(mtot, c)
        yield {key: c for key, c in zip(keys, counts) if c}, coeff


def _weighted_sum(bodies, counts):
    pts = None
    for idx, c in counts.items():
        v = bodies[idx].vertices * c
        pts = v if pts is None else (pts[:, None, :] + v[None, :, :]).reshape(-1, v.shape[1])
        if len(pts) > 4000:
            pts = Polytope(pts).vertices
    return Polytope(pts)


def _group(objs):
    """Map each object to the index of its first identical occurrence."""
    firsts = []
    keys = []
    for o in objs:
        for i, f in enumerate(firsts):
            if f is o:
                keys.append(i)
                break
        else:
            firsts.append(o)
            keys.append(len(firsts) - 1)
    return firsts, keys


def mixed_volume(bodies):
    """Mixed volume V(K_1, ..., K_n) by polarization of the volume."""
    if not bodies:
        raise ValueError("need n bodies")
    n = bodies[0].dim
    if len(bodies) != n or any(b.dim != n for b in bodies):
        raise ValueError(f"mixed volume in R^{n} needs exactly {n} bodies of dimension {n}")
    distinct, keys = _group(bodies)
    total = 0.0
    for counts, coeff in polarization_terms(keys):
        total += coeff * _weighted_sum(distinct, counts).volume
    return total


def mixed_area_measure(bodies):
    """Mixed area measure S(K_1, ..., K_{n-1}, .) by polarization."""
    if not bodies:
        raise ValueError("need n-1 bodies")
    n = bodies[0].dim
    if len(bodies) != n - 1 or any(b.dim != n for b in bodies):
        raise ValueError(f"mixed area measure in R^{n} needs exactly {n - 1} bodies")
    distinct, keys = _group(bodies)
    normals, masses = [], []
    for counts, coeff in polarization_terms(keys):
        S = surface_area_measure(_weighted_sum(distinct, counts))
        normals.append(S.normals)
        masses.append(coeff * S.masses)
    mu = AtomicSphereMeasure(n, np.vstack(normals), np.concatenate(masses)).pruned()
    return mu


def _ball_intrinsic(P, j, m):
    n = P.dim
    ball = polytopal_ball(n, m)
    return comb(n, j) * mixed_volume([P] * j + [ball] * (n - j)) / kappa(n - j)


def intrinsic_volume(P, j, m=200, extrapolate=True):
    """Intrinsic volume V_j(P).

    ``V_n``, ``V_{n-1}`` and ``V_0`` are exact. Other orders use the mixed
    volume with the polytopal ball of resolution ``m``; with ``extrapolate``
    the values at ``m`` and ``2m`` are Richardson-combined assuming an error
    of order ``m^(-2/(n-1))``.
    """
    n = P.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    if j == 0:
        return 1.0
    if j == n:
        return P.volume
    if j == n - 1:
        return 0.5 * surface_area_measure(P).total_mass
    coarse = _ball_intrinsic(P, j, m)
    if not extrapolate:
        return coarse
    fine = _ball_intrinsic(P, j, 2 * m)
    ratio = 2.0 ** (2.0 / (n - 1))
    return (ratio * fine - coarse) / (ratio - 1.0)
