"""Both sides of the kinematic identities, with residual reports.

Every ``verify_*`` function evaluates a left-hand side (usually a Monte Carlo
average over Haar rotations) and an independently computed right-hand side
and returns a :class:`VerificationReport`.

Wherever an exact-ball constant pairs with a measure computed from the
polytopal ball, ``vol(B_m)`` is used in place of ``kappa_n`` so that the
discretization bias cancels between the two sides.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from math import comb, sqrt

import numpy as np

from .functions import (
    NotDeconvolvable,
    RadialProfile,
    ball_indicator,
    floor_body,
    indicator,
    inf_convolve,
    inf_deconvolve,
    project,
    rotate,
)
from .geometry import (
    Rotation,
    intrinsic_volume,
    kappa,
    minkowski_sum,
    mixed_area_measure,
    polytopal_ball,
    polytopal_disk,
    sample_rotation,
    sample_rotations,
    surface_area_measure,
)
from .monge_ampere import (
    double_integral_max,
    double_integral_min_sphere,
    hessian_integral_radial,
    map_j,
    map_j_integral,
    mixed_map,
    mixed_map_integral,
    r_transform,
    radial_map_j_integral,
    radial_mixed_integral,
)

Z99 = 2.576
DEFAULT_CHUNK = 256

REPORT_KEYS = ("identity", "n", "j", "m", "N", "seed", "lhs", "rhs", "abs_err", "rel_err", "ci99", "seconds")


@dataclass
class VerificationReport:
    """Outcome of one identity check."""

    identity: str
    n: int
    j: int | None
    m: int | None
    N: int | None
    seed: int | None
    lhs: float
    rhs: float
    ci99: float | None = None
    seconds: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def abs_err(self):
        return abs(self.lhs - self.rhs)

    @property
    def rel_err(self):
        return self.abs_err / max(abs(self.rhs), 1e-12)

    def within_ci(self):
        """True when the residual is inside the 99% Monte Carlo half-width."""
        return self.ci99 is not None and self.abs_err <= self.ci99

    def passed(self, tol):
        return self.rel_err < tol

    def to_dict(self, timestamp=True):
        out = {k: getattr(self, k) for k in REPORT_KEYS}
        for k in ("lhs", "rhs", "abs_err", "rel_err"):
            out[k] = float(out[k])
        if not timestamp:
            out["seconds"] = None
        if self.meta:
            out["meta"] = self.meta
        return out


def _report(identity, n, j, m, N, seed, lhs, rhs, ci, t0, **meta):
    return VerificationReport(identity, n, j, m, N, seed, float(lhs), float(rhs),
                              None if ci is None else float(ci), time.perf_counter() - t0, meta)


# --------------------------------------------------------------------------
# Monte Carlo engine


def _eval_chunk(fn, items):
    return np.array([fn(x) for x in items], dtype=float)


def monte_carlo(fn, samples, chunk=DEFAULT_CHUNK, jobs=None):
    """Mean of ``fn`` over ``samples`` with a 99% CI half-width.

    ``fn`` may return a scalar or a fixed-length vector; mean and half-width
    then have the same shape. Samples are split into fixed chunks of size
    ``chunk`` and chunk sums are reduced in order, so the result does not
    depend on ``jobs``.
    """
    samples = list(samples)
    N = len(samples)
    if N == 0:
        raise ValueError("need at least one sample")
    chunks = [samples[i:i + chunk] for i in range(0, N, chunk)]
    if jobs and jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(partial(_eval_chunk, fn), chunks))
    else:
        parts = [_eval_chunk(fn, c) for c in chunks]
    total = np.zeros(parts[0].shape[1:])
    for p in parts:
        total = total + np.sum(p, axis=0)
    mean = total / N
    values = np.concatenate(parts)
    sd = np.std(values, axis=0, ddof=1) if N > 1 else np.zeros_like(mean)
    half = Z99 * sd / sqrt(N)
    if mean.ndim == 0:
        return float(mean), float(half)
    return mean, half


# --------------------------------------------------------------------------
# constants


def flag_coefficient(k, j):
    """Flag coefficient ``C(k, j) kappa_k / (kappa_j kappa_{k-j})``."""
    if not 0 <= j <= k:
        raise ValueError(f"flag coefficient needs 0 <= j <= k, got k={k}, j={j}")
    return comb(k, j) * kappa(k) / (kappa(j) * kappa(k - j))


def kinematic_coefficient(n, j, k):
    """Coefficient of ``V_k(K) V_{j-k}(L)`` in the classical kinematic formula.

    Written with binomials of ``2n - j`` and unit-ball volumes; it agrees
    with ``flag(n-k, j-k) / flag(n, j-k)``.
    """
    if not 0 <= k <= j <= n:
        raise ValueError("need 0 <= k <= j <= n")
    num = comb(2 * n - j, n - j) * kappa(n - k) * kappa(n + k - j)
    den = comb(2 * n - j, n - k) * kappa(n) * kappa(n - j)
    return num / den


def _ball_volume(n, m):
    return polytopal_ball(n, m).volume


def _kappa_like(u, m):
    """The constant standing in for ``kappa_n`` for this argument type."""
    return kappa(u.dim) if isinstance(u, RadialProfile) else _ball_volume(u.dim, m)


# --------------------------------------------------------------------------
# functionals


def functional_intrinsic_volume(u, j, alpha, m=128):
    """``Z_{j,alpha}(u) = C(n,j) / kappa_{n-j} ∫ alpha(|y|) dMA*_j(u; y)``.

    ``Z_0`` is normalized by the ball volume actually used, so it equals
    ``alpha(0)`` exactly.
    """
    n = u.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    if j == 0:
        return map_j_integral(u, 0, alpha, m) / _kappa_like(u, m)
    return comb(n, j) / kappa(n - j) * map_j_integral(u, j, alpha, m)


def mixed_functional(args, alpha):
    """``∫ alpha(|y|) dMA*(u_1, ..., u_n; y)``."""
    return mixed_map_integral(list(args), alpha)


def closed_form_cone_pair(lam, s, mu, t, j, alpha, n):
    """``∫ alpha dMA*_j((lam ⧆ u_s) □ (mu ⧆ u_t))`` for cone functions.

    ``kappa_n (lam^j alpha(s) + ((lam+mu)^j - lam^j) alpha(t))`` when
    ``s <= t``, and the same with the roles swapped otherwise. For ``j = 0``
    the measure is ``kappa_n delta_o`` and the value is ``kappa_n alpha(0)``.
    """
    if min(lam, s, mu, t) < 0:
        raise ValueError("parameters must be nonnegative")
    if j == 0:
        return kappa(n) * float(alpha(0.0))
    if s > t:
        lam, s, mu, t = mu, t, lam, s
    return kappa(n) * (lam ** j * float(alpha(s)) + ((lam + mu) ** j - lam ** j) * float(alpha(t)))


# --------------------------------------------------------------------------
# per-sample evaluators (module level so they pickle for --jobs)


def _sample_functional(u, v, j, alpha, m, rot):
    return map_j_integral(inf_convolve(u, rotate(v, rot)), j, alpha, m)


def _sample_functional_paired(u, v, j, alpha, m, u_maps, rot):
    """LHS integrand and the RHS evaluated with ``v`` in the same frame."""
    vr = rotate(v, rot)
    lhs = map_j_integral(inf_convolve(u, vr), j, alpha, m)
    rhs = sum(comb(j, i) * double_integral_max(u_maps[i], map_j(vr, j - i, m), alpha) for i in range(j + 1))
    return lhs, rhs


def _sample_bodies(K, L, j, m, rot):
    return intrinsic_volume(minkowski_sum(K, rotate(L, rot)), j, m)


def _sample_indicator(u, L, j, alpha, m, rot):
    return functional_intrinsic_volume(inf_convolve(u, indicator(rotate(L, rot))), j, alpha, m)


def _sample_mixed(us, vs, k, alpha, m, rot):
    n = (us or vs)[0].dim
    args = list(us) + _repeat_aware(vs, [rotate(v, rot) for v in vs]) + [ball_indicator(n, m)] * (n - k)
    return mixed_map_integral(args, alpha)


def _sample_deconv(u, v, k, alpha, m, rot):
    return functional_intrinsic_volume(inf_deconvolve(u, rotate(v, rot)), k, alpha, m)


def _sample_kubota(us, k, phi, rot):
    basis = rot.matrix[:, :k].T
    proj = [project(u, basis) for u in us]
    return mixed_map_integral(_repeat_aware(us, proj), phi)


def _repeat_aware(originals, images):
    """Keep object identity of repeated arguments after a map."""
    out = []
    for i, o in enumerate(originals):
        for q in range(i):
            if originals[q] is o:
                out.append(out[q])
                break
        else:
            out.append(images[i])
    return out


def _sample_sphere(K, L, j, disk, beta, rot):
    body = minkowski_sum(K, rotate(L, rot))
    return _sphere_integrand(body, j, disk, beta)


# --------------------------------------------------------------------------
# identity checks


def _full_args(fs, n, m):
    return list(fs) + [ball_indicator(n, m)] * (n - len(fs))


def verify_functional_kinematic(u, v, j, alpha, N=2000, m=128, seed=0, chunk=DEFAULT_CHUNK, jobs=None,
                                paired=True):
    """Functional additive kinematic formula for the conjugate measures.

    ``c ∫ ∫ alpha dMA*_j(u □ (v∘ϑ^{-1})) dϑ = Σ_i C(j,i) ∫∫ alpha(max{|x|,|y|}) dMA*_i(u) dMA*_{j-i}(v)``

    with ``c = vol(B_m)``. Radial profiles use the exact ball and need no
    sampling.

    The polytopal ball is not rotation invariant, so the measures of ``v``
    depend slightly on its orientation relative to ``B_m``. With ``paired``
    the right-hand side is averaged over the same rotations, evaluating
    ``MA*_k(v∘ϑ^{-1})`` in the frame the left-hand side sees; the
    single-frame value is kept in ``meta["rhs_fixed"]``. ``ci99`` is the
    half-width of the left-hand estimate.
    """
    t0 = time.perf_counter()
    n = u.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    c = _kappa_like(u, m)
    u_maps = [map_j(u, i, m) for i in range(j + 1)]
    rhs_fixed = sum(comb(j, i) * double_integral_max(u_maps[i], map_j(v, j - i, m), alpha) for i in range(j + 1))
    meta = dict(kappa_n=kappa(n), ball_volume=c, rhs_fixed=float(rhs_fixed), paired=False)
    if isinstance(u, RadialProfile) and isinstance(v, RadialProfile):
        lhs = c * radial_map_j_integral(inf_convolve(u, v), j, alpha)
        return _report("functional_kinematic", n, j, m, 0, seed, lhs, rhs_fixed, None, t0, **meta)
    rots = sample_rotations(n, N, seed)
    if paired:
        mean, half = monte_carlo(partial(_sample_functional_paired, u, v, j, alpha, m, u_maps), rots, chunk, jobs)
        lhs, rhs, ci = c * mean[0], mean[1], c * half[0]
        meta.update(paired=True, rhs_ci99=float(half[1]))
    else:
        mean, half = monte_carlo(partial(_sample_functional, u, v, j, alpha, m), rots, chunk, jobs)
        lhs, rhs, ci = c * mean, rhs_fixed, c * half
    return _report("functional_kinematic", n, j, m, N, seed, lhs, rhs, ci, t0, **meta)


def verify_bodies_kinematic(K, L, j, N=2000, m=200, seed=0, chunk=DEFAULT_CHUNK, jobs=None):
    """Classical additive kinematic formula for intrinsic volumes."""
    t0 = time.perf_counter()
    n = K.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    rots = sample_rotations(n, N, seed)
    lhs, ci = monte_carlo(partial(_sample_bodies, K, L, j, m), rots, chunk, jobs)
    rhs = 0.0
    for i in range(j + 1):
        coeff = flag_coefficient(n - i, j - i) / flag_coefficient(n, j - i)
        rhs += coeff * intrinsic_volume(K, i, m) * intrinsic_volume(L, j - i, m)
    return _report("bodies_kinematic", n, j, m, N, seed, lhs, rhs, ci, t0)


def verify_indicator_corollary(u, L, j, alpha, N=2000, m=128, seed=0, chunk=DEFAULT_CHUNK, jobs=None):
    """``∫ Z_j(u □ I_{ϑL}) dϑ = Σ_i flag(n-i, j-i)/flag(n, j-i) Z_i(u) V_{j-i}(L)``."""
    t0 = time.perf_counter()
    n = u.dim
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    rots = sample_rotations(n, N, seed)
    lhs, ci = monte_carlo(partial(_sample_indicator, u, L, j, alpha, m), rots, chunk, jobs)
    rhs = 0.0
    for i in range(j + 1):
        coeff = flag_coefficient(n - i, j - i) / flag_coefficient(n, j - i)
        rhs += coeff * functional_intrinsic_volume(u, i, alpha, m) * intrinsic_volume(L, j - i)
    return _report("indicator_corollary", n, j, m, N, seed, lhs, rhs, ci, t0)


def verify_mixed_functional_formula(us, vs, k, alpha, N=2000, m=128, seed=0, chunk=DEFAULT_CHUNK, jobs=None):
    """Rotation average of a mixed functional with a rotated block.

    ``∫ Vbar(u_1..u_j, v_1∘ϑ^{-1}..v_{k-j}∘ϑ^{-1}, I_B[n-k]) dϑ
    = (1/c) ∫∫ alpha(max) dMA*_j(u_1..u_j) dMA*_{k-j}(v_1..v_{k-j})``
    """
    t0 = time.perf_counter()
    us, vs = list(us), list(vs)
    j = len(us)
    if not us and not vs:
        raise ValueError("need at least one function")
    n = (us or vs)[0].dim
    if not 0 <= j <= k <= n or len(vs) != k - j:
        raise ValueError("need len(us) = j <= k <= n and len(vs) = k - j")
    c = _ball_volume(n, m)
    if vs:
        rots = sample_rotations(n, N, seed)
        lhs, ci = monte_carlo(partial(_sample_mixed, us, vs, k, alpha, m), rots, chunk, jobs)
    else:
        lhs, ci, N = _sample_mixed(us, vs, k, alpha, m, Rotation.identity(n)), None, 0
    mu = mixed_map(_full_args(us, n, m))
    nu = mixed_map(_full_args(vs, n, m))
    rhs = double_integral_max(mu, nu, alpha) / c
    return _report("mixed_functional_formula", n, j, m, N, seed, lhs, rhs, ci, t0, k=k, ball_volume=c)


def verify_deconvolution(u, v, k, alpha, N=2000, m=128, seed=0, chunk=DEFAULT_CHUNK, jobs=None):
    """Rotation average of ``Z_k(u ⋇ (v∘ϑ^{-1}))`` against the alternating sum.

    Every sampled rotation must admit the deconvolution; otherwise a
    ``ValueError`` naming the failing samples is raised.
    """
    t0 = time.perf_counter()
    n = u.dim
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for dimension {n}")
    rots = sample_rotations(n, N, seed)
    bad = []
    for idx, rot in enumerate(rots):
        try:
            inf_deconvolve(u, rotate(v, rot))
        except NotDeconvolvable:
            bad.append(idx)
        if isinstance(v, RadialProfile):
            break  # rotation invariant: one check covers all
    if bad:
        raise ValueError(f"rolling freely violated at rotation samples {bad[:10]}"
                         + (" ..." if len(bad) > 10 else ""))
    if isinstance(u, RadialProfile) and isinstance(v, RadialProfile):
        lhs, ci, N = functional_intrinsic_volume(inf_deconvolve(u, v), k, alpha, m), None, 0
    else:
        lhs, ci = monte_carlo(partial(_sample_deconv, u, v, k, alpha, m), rots, chunk, jobs)
    c = _kappa_like(u, m)
    total = 0.0
    for j in range(k + 1):
        total += (-1) ** (k - j) * comb(k, j) * double_integral_max(map_j(u, j, m), map_j(v, k - j, m), alpha)
    rhs = comb(n, k) / (c * kappa(n - k)) * total
    return _report("deconvolution", n, k, m, N, seed, lhs, rhs, ci, t0, ball_volume=c)


def verify_kubota(us, k, phi, N=2000, seed=0, m=128, chunk=DEFAULT_CHUNK, jobs=None):
    """Kubota-type projection formula for conjugate mixed measures.

    ``(1/c) ∫ phi dMA*(u_1..u_k, I_B[n-k]) = (1/kappa_k) E_E ∫_E phi dMA*_E(proj_E u_1, ...)``
    where ``E = ϑ span(e_1..e_k)`` for Haar ``ϑ``.
    """
    t0 = time.perf_counter()
    us = list(us)
    if len(us) != k:
        raise ValueError("need exactly k functions")
    n = us[0].dim
    if not 1 <= k < n:
        raise ValueError(f"k={k} out of range for dimension {n}")
    if all(isinstance(u, RadialProfile) for u in us):
        c = kappa(n)
        lhs = radial_mixed_integral(us, k, phi) / c
    else:
        c = _ball_volume(n, m)
        lhs = mixed_map_integral(_full_args(us, n, m), phi) / c
    rots = sample_rotations(n, N, seed)
    mean, ci = monte_carlo(partial(_sample_kubota, us, k, phi), rots, chunk, jobs)
    rhs = mean / kappa(k)
    return _report("kubota", n, k, m, N, seed, lhs, rhs, ci / kappa(k), t0, ball_volume=c)


def _secant_conjugate_profile(psi, rho):
    """Radial piecewise-linear stand-in for the conjugate of ``psi``.

    Breaks at ``g_i = psi'(rho_i)``; on ``[g_{i-1}, g_i]`` the slope is the
    secant of ``psi*(g) = g rho - psi(rho)``.
    """
    g = np.array([psi.d1(r) for r in rho])
    star = g * rho - np.array([psi.value(r) for r in rho])
    slopes = np.diff(star) / np.diff(g)
    return g, slopes


def hessian_link_rhs(psi, zeta, n, j, segments=None):
    """``C(n,j) ∫ R^{n-j}zeta(|x|) dMA_j(v; x)`` for ``v = psi(|x|)``.

    Evaluated on the conjugate side: ``MA_j(v) = MA*_j(v*)`` and for radial
    ``v*`` this is ``kappa_n j ∫ beta(r) psi'(r)^{j-1} psi''(r) dr``. With
    ``segments`` the conjugate profile is made piecewise linear and
    integrated exactly; otherwise the 1-D integral is done by quadrature.
    """
    from scipy import integrate

    beta = r_transform(zeta, n - j)
    R = zeta.support_bound
    if j == 0:
        return kappa(n) * float(beta(0.0))
    if segments is None:
        def f(r):
            return float(beta(r)) * psi.d1(r) ** (j - 1) * psi.d2(r)

        pts = list(zeta.breaks[1:-1]) or None
        val, _ = integrate.quad(f, 0.0, R, points=pts, epsrel=1e-12, epsabs=0.0, limit=200)
        return comb(n, j) * kappa(n) * j * val
    rho = np.linspace(0.0, R, segments + 1)
    g, slopes = _secant_conjugate_profile(psi, rho)
    a = beta(slopes)
    return comb(n, j) * kappa(n) * float(np.dot(a, g[1:] ** j - g[:-1] ** j))


def verify_hessian_link(psi, zeta, n, j, segments=None):
    """Singular Hessian integral against the R-transformed conjugate side."""
    t0 = time.perf_counter()
    if not 0 <= j <= n:
        raise ValueError(f"j={j} out of range for dimension {n}")
    lhs = hessian_integral_radial(psi, zeta, n, j)
    rhs = hessian_link_rhs(psi, zeta, n, j, segments)
    return _report("hessian_link", n, j, None, None, None, lhs, rhs, None, t0, segments=segments)


def gnomonic(z):
    """Lower half-sphere to R^{n-1}: ``z -> z' / |z_n|``."""
    z = np.atleast_2d(z)
    return z[:, :-1] / np.abs(z[:, -1:])


def gnomonic_inverse(x):
    x = np.atleast_2d(x)
    y = np.column_stack([x, -np.ones(len(x))])
    return y / np.linalg.norm(y, axis=1, keepdims=True)


def verify_floor_lemma(bodies, phi, seed=None):
    """Floor functions versus lower mixed area measure, both atomic.

    ``∫ phi(gnom^{-1}(y)) dMA*(⌊K_1⌋, ..., ⌊K_{n-1}⌋; y)
    = ∫_{z_n < 0} |z_n| phi(z) dS(K_1, ..., K_{n-1}, z)``
    """
    t0 = time.perf_counter()
    bodies = list(bodies)
    n = bodies[0].dim
    if n < 2 or len(bodies) != n - 1:
        raise ValueError("need n-1 bodies in R^n with n >= 2")
    floors = _repeat_aware(bodies, [floor_body(K) for K in bodies])
    mu = mixed_map(floors)
    lhs = float(np.dot(mu.masses, phi(gnomonic_inverse(mu.locations)))) if len(mu) else 0.0
    S = mixed_area_measure(bodies)
    low = S.normals[:, -1] < -1e-12
    z = S.normals[low]
    rhs = float(np.dot(S.masses[low] * np.abs(z[:, -1]), phi(z))) if low.any() else 0.0
    return _report("floor_lemma", n, None, None, None, seed, lhs, rhs, None, t0)


def _sphere_rotations(n, N, seed):
    """Rotations fixing ``e_n`` composed with a fair reflection through H."""
    rng = np.random.default_rng(seed)
    flip = np.eye(n)
    flip[-1, -1] = -1.0
    out = []
    for _ in range(N):
        M = np.eye(n)
        M[:-1, :-1] = sample_rotation(n - 1, rng).matrix
        if rng.integers(2):
            out.append(Rotation(flip @ M, reflection=True))
        else:
            out.append(Rotation(M))
    return out


def _sphere_measure(bodies, n, disk):
    """``S(K[j], D[n-1-j], .)`` with the disk filling the remaining slots."""
    args = list(bodies) + [disk] * (n - 1 - len(bodies))
    if all(a is disk for a in args):
        return surface_area_measure(disk)
    return mixed_area_measure(args)


def _sphere_integrand(body, j, disk, beta):
    n = body.dim
    S = _sphere_measure([body] * j, n, disk)
    if len(S) == 0:
        return 0.0
    zn = np.abs(S.normals[:, -1])
    return float(np.dot(S.masses, zn * beta(zn)))


def verify_sphere_kinematic(K, L, j, beta, N=2000, seed=0, m=64, chunk=DEFAULT_CHUNK, jobs=None):
    """Kinematic formula for mixed area measures with a disk in ``H = e_n^⊥``.

    ``E ∫ |z_n| beta(|z_n|) dS((K+ηL)[j], D[n-1-j], z)
    = 1/(2a) Σ_i C(j,i) ∫∫ |w_n||z_n| beta(min{|w_n|,|z_n|}) dS(K[i], D[..], z) dS(L[j-i], D[..], w)``

    ``η`` ranges over rotations fixing ``e_n`` and the reflection through
    ``H``; ``D = polytopal_disk(n, m)`` and ``a`` is its (n-1)-volume.
    """
    t0 = time.perf_counter()
    n = K.dim
    if n < 2 or not 0 <= j <= n - 1:
        raise ValueError(f"need n >= 2 and 0 <= j <= n-1, got n={n}, j={j}")
    disk = polytopal_disk(n, m)
    area = surface_area_measure(disk).total_mass / 2.0
    rots = _sphere_rotations(n, N, seed)
    lhs, ci = monte_carlo(partial(_sample_sphere, K, L, j, disk, beta), rots, chunk, jobs)
    rhs = 0.0
    for i in range(j + 1):
        mu = _sphere_measure([K] * i, n, disk)
        nu = _sphere_measure([L] * (j - i), n, disk)
        rhs += comb(j, i) * double_integral_min_sphere(mu, nu, beta)
    rhs /= 2.0 * area
    return _report("sphere_kinematic", n, j, m, N, seed, lhs, rhs, ci, t0, disk_area=area)
