import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from convkin import (
    EpiPolyhedral, MaxAffine, Polytope, indicator, inf_convolve, kappa, mixed_volume, polytopal_ball, rotate, sample_rotation, support_fn, volume,
)
from convkin.functions import RadialProfile, cone_function
from convkin.monge_ampere import (
    AtomicMeasure, SmoothProfile, TestFunction, beta_from_zeta, conj_ma, double_integral_max, elementary_symmetric,
    hessian_integral_radial, integrate_radial, ma, ma_q_radial_integral, map_j, mixed_discriminant, mixed_map,
    r_transform, radial_map_j_integral,
)

from conftest import random_epi, random_max_affine, square


def _at_origin(mu, mass, tol=1e-12):
    return len(mu) == 1 and np.allclose(mu.locations, 0.0, atol=1e-12) and mu.total_mass == pytest.approx(mass, rel=tol)


class TestMA:
    def test_affine(self):
        assert ma(MaxAffine([(0.3, -1.0)], [2.0])).total_mass == 0.0

    def test_cross_polytope_slopes(self):
        v = MaxAffine([(1, 0), (-1, 0), (0, 1), (0, -1)], [0, 0, 0, 0])
        assert _at_origin(ma(v), 2.0)

    def test_support_of_square(self):
        assert _at_origin(ma(support_fn(square())), 1.0)

    def test_mass_conservation(self, rng):
        for n in (2, 3):
            for _ in range(5):
                v = random_max_affine(rng, 12, n)
                assert ma(v).total_mass == pytest.approx(volume(Polytope(v.slopes)), rel=1e-12)

    def test_atoms_where_pieces_meet(self, rng):
        v = random_max_affine(rng, 8)
        mu = ma(v)
        vals = mu.locations @ v.slopes.T + v.offsets
        top = vals.max(axis=1, keepdims=True)
        # at least n + 1 pieces are jointly active at each atom
        assert np.all((np.abs(vals - top) < 1e-9).sum(axis=1) >= 3)

    def test_rotation_covariance(self, rng):
        v = random_max_affine(rng, 10)
        R = sample_rotation(2, rng)
        assert ma(rotate(v, R)).same_as(ma(v).pushforward(R.matrix), tol=1e-9)


class TestConjMA:
    def test_indicator(self, rng):
        P = Polytope(rng.normal(size=(9, 2)))
        assert _at_origin(conj_ma(indicator(P)), volume(P))

    def test_total_mass_is_domain_volume(self, rng):
        u = random_epi(rng, 9)
        assert conj_ma(u).total_mass == pytest.approx(u.domain.volume, rel=1e-12)

    def test_gradient_pushforward(self):
        rng = np.random.default_rng(8)
        corners = np.array([(0, 0), (1, 0), (0, 1), (1, 1)], dtype=float)
        inner = rng.uniform(0, 1, size=(12, 2))
        P = np.vstack([corners, inner])
        u = EpiPolyhedral(P, rng.uniform(0, 1, len(P)))
        h = u._hull
        grads = h.global_gradients()

        def beta(y):
            return np.exp(-np.sum((y - 0.2) ** 2, axis=1)) + y[:, 0] ** 2

        mu = conj_ma(u)
        exact = float(mu.masses @ beta(mu.locations))
        x = rng.uniform(0, 1, size=(100_000, 2))
        cell = np.argmax(((x - h.origin) @ h.basis.T) @ h.gradients.T + h.intercepts, axis=1)
        samples = beta(grads[cell])
        se = samples.std() / np.sqrt(len(x))
        assert abs(samples.mean() - exact) < 3 * se


class TestMixedMap:
    def test_diagonal(self, rng):
        u = random_epi(rng, 7)
        assert mixed_map([u, u]).same_as(conj_ma(u))

    def test_indicators(self, rng):
        K, L = Polytope(rng.normal(size=(6, 2))), Polytope(rng.normal(size=(7, 2)))
        assert _at_origin(mixed_map([indicator(K), indicator(L)]), mixed_volume([K, L]), tol=1e-9)

    def test_indicators_3d(self, rng):
        bodies = [Polytope(rng.normal(size=(6, 3))) for _ in range(3)]
        mu = mixed_map([indicator(B) for B in bodies])
        assert _at_origin(mu, mixed_volume(bodies), tol=1e-9)

    def test_permutation_invariance_3d(self, rng):
        us = [random_epi(rng, 5, 3) for _ in range(3)]
        base = mixed_map(us)
        for perm in itertools.permutations(us):
            assert mixed_map(list(perm)).same_as(base, tol=1e-9)

    def test_masses_nonnegative(self, rng):
        u, w = random_epi(rng, 6), random_epi(rng, 6)
        assert np.all(mixed_map([u, w]).masses >= -1e-9)

    def test_arity(self, rng):
        with pytest.raises(ValueError):
            mixed_map([random_epi(rng)])

    def test_planar_fast_path_agrees(self, rng):
        for _ in range(30):
            u = random_epi(rng, int(rng.integers(3, 8)))
            I = indicator(polytopal_ball(2, int(rng.integers(3, 40))))
            assert mixed_map([u, I]).same_as(mixed_map([u, I], fast=False), tol=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_multilinear(self, seed):
        rng = np.random.default_rng(seed)
        u, u2, w = (random_epi(rng, 4) for _ in range(3))
        lhs = mixed_map([inf_convolve(u, u2), w])
        rhs = mixed_map([u, w]) + mixed_map([u2, w])
        assert lhs.same_as(rhs, tol=1e-9)

    def test_multilinear_3d(self, rng):
        u, u2, w, z = (random_epi(rng, 4, 3) for _ in range(4))
        lhs = mixed_map([inf_convolve(u, u2), w, z])
        rhs = mixed_map([u, w, z]) + mixed_map([u2, w, z])
        assert lhs.same_as(rhs, tol=1e-9)

    @pytest.mark.parametrize("j", [1, 2])
    def test_valuation(self, j):
        # restrictions of one convex function to [0,2]x[0,1] and [1,3]x[0,1]
        P = np.array([(x, y) for x in np.linspace(0, 3, 7) for y in np.linspace(0, 1, 3)])
        c = 0.7 * (P[:, 0] - 1.3) ** 2 + 1.5 * (P[:, 1] - 0.2) ** 2

        def part(lo, hi):
            keep = (P[:, 0] >= lo - 1e-12) & (P[:, 0] <= hi + 1e-12)
            return EpiPolyhedral(P[keep], c[keep])

        other = EpiPolyhedral([(0, 0), (1, 0.2), (0.3, 1.1)], [0.0, 0.4, 0.1])

        def phi(y):
            return np.cos(y[:, 0]) + y[:, 1] ** 2

        def F(u):
            args = [u] * j + [other] * (2 - j)
            mu = mixed_map(args)
            return float(mu.masses @ phi(mu.locations))

        assert F(part(0, 3)) + F(part(1, 2)) == pytest.approx(F(part(0, 2)) + F(part(1, 3)), rel=1e-9)


class TestMapJ:
    def test_j0(self):
        mu = map_j(random_epi(np.random.default_rng(0)), 0, 64)
        assert _at_origin(mu, volume(polytopal_ball(2, 64)))

    def test_jn(self, rng):
        u = random_epi(rng)
        assert map_j(u, 2).same_as(conj_ma(u))

    def test_square_mean_width(self):
        # C(2,1) * mass -> kappa_1 V_1([0,1]^2) = 4
        assert abs(2 * map_j(indicator(square()), 1, 256).total_mass / 4 - 1) < 0.01

    def test_range(self, rng):
        with pytest.raises(ValueError):
            map_j(random_epi(rng), 3)


class TestRadial:
    @pytest.mark.parametrize("n", [2, 3])
    def test_cone(self, n, alpha):
        for t in (0.0, 0.3, 1.1):
            for j in range(1, n + 1):
                val = radial_map_j_integral(cone_function(n, t), j, alpha)
                assert val == pytest.approx(kappa(n) * alpha(t), rel=1e-12)

    def test_j0(self, alpha):
        assert radial_map_j_integral(cone_function(2, 0.7), 0, alpha) == pytest.approx(kappa(2) * alpha(0))

    def _quadratic(self):
        r = np.linspace(0, 1, 21)
        return RadialProfile(2, r, r ** 2)

    def test_quadratic_profile_against_planar_quadrature(self):
        u = self._quadratic()
        a = TestFunction.hat(1.0, 3.0)
        h = 2.0 / 2000
        x = np.arange(-1 + h / 2, 1, h)
        X, Y = np.meshgrid(x, x)
        r = np.hypot(X, Y)
        inside = r <= 1
        # |∇u| is piecewise constant in r
        seg = np.minimum(np.searchsorted(u.breaks, r, side="right") - 1, len(u.slopes) - 1)
        slope = u.slopes[seg]
        dens = np.where(inside, a(slope), 0.0)
        # j = 2: ∫ alpha(|∇u|) dx ; j = 1: (1/2) ∫ alpha(|∇u|) / |x| dx
        assert radial_map_j_integral(u, 2, a) == pytest.approx(dens.sum() * h * h, rel=1e-3)
        assert radial_map_j_integral(u, 1, a) == pytest.approx(0.5 * (dens / r).sum() * h * h, rel=1e-3)

    def test_polyhedral_discretization_converges(self):
        u = self._quadratic()
        a = TestFunction.hat(1.0, 3.0)
        exact = radial_map_j_integral(u, 2, a)
        errs = [abs(integrate_radial(conj_ma(u.discretize(m)), a) / exact - 1) for m in (32, 128)]
        assert errs[1] < errs[0] and errs[1] < 1e-3


class TestIntegrals:
    def test_zero_measure(self, alpha):
        assert integrate_radial(AtomicMeasure(2), alpha) == 0.0

    def test_dirac(self, alpha):
        assert integrate_radial(AtomicMeasure.dirac(2, 2.5), alpha) == pytest.approx(2.5 * alpha(0))

    def test_linear_in_alpha(self, rng):
        mu = conj_ma(random_epi(rng, 8))
        a = TestFunction([0, 0.4, 2.0], [1.0, 0.3, 0.0])
        b = TestFunction([0, 1.0, 1.5], [0.2, 0.9, 0.0])
        r = np.unique(np.r_[a.breaks, b.breaks])
        ab = TestFunction(r, a(r) + 2 * b(r))
        assert integrate_radial(mu, ab) == pytest.approx(integrate_radial(mu, a) + 2 * integrate_radial(mu, b))

    def test_double_with_dirac(self, rng, alpha):
        mu = conj_ma(random_epi(rng, 8))
        d = AtomicMeasure.dirac(2)
        assert double_integral_max(mu, d, alpha) == pytest.approx(integrate_radial(mu, alpha), rel=1e-14)
        assert double_integral_max(d, d, alpha) == pytest.approx(alpha(0))

    def test_double_symmetric(self, rng, alpha):
        mu, nu = conj_ma(random_epi(rng, 8)), conj_ma(random_epi(rng, 8))
        assert double_integral_max(mu, nu, alpha) == pytest.approx(double_integral_max(nu, mu, alpha), rel=1e-14)


def _random_zeta(rng):
    r = np.r_[0.0, np.sort(rng.uniform(0.05, 2.0, 4))]
    return TestFunction(r, np.r_[rng.uniform(0, 1, 4), 0.0])


class TestRTransform:
    def test_zero(self):
        R = r_transform(TestFunction([0, 1], [0, 0]), 2)
        assert np.allclose(R(np.linspace(0, 2, 9)), 0.0)

    def test_hat(self):
        s = np.linspace(0, 1.5, 31)
        expect = np.where(s <= 1, (1 - s ** 2) / 2, 0.0)
        assert np.allclose(r_transform(TestFunction.hat(1.0, 1.0), 1)(s), expect, atol=1e-14)

    def test_m0(self, rng):
        z = _random_zeta(rng)
        s = np.linspace(0, 2.5, 50)
        assert np.allclose(r_transform(z, 0)(s), z(s))

    def test_support(self, rng):
        z = _random_zeta(rng)
        R = r_transform(z, 2)
        assert np.allclose(R(np.linspace(z.support_bound, z.support_bound + 1, 10)), 0.0, atol=1e-12)

    def test_definition_by_quadrature(self, rng):
        z = _random_zeta(rng)
        for m in (1, 2, 3):
            R = r_transform(z, m)
            for s in (0.0, 0.3, 1.1):
                tail, _ = integrate.quad(lambda t: t ** (m - 1) * z(t), s, z.support_bound,
                                         points=list(z.breaks), limit=200)
                assert R(s) == pytest.approx(s ** m * z(s) + m * tail, rel=1e-9, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 4))
    def test_beta_from_zeta(self, seed, n):
        z = _random_zeta(np.random.default_rng(seed))
        s = np.linspace(0, 2.2, 45)
        for j in range(n + 1):
            assert np.allclose(beta_from_zeta(z, n, j)(s), r_transform(z, n - j)(s), rtol=1e-9, atol=1e-12)

    def test_beta_from_zeta_jn(self, rng):
        z = _random_zeta(rng)
        assert beta_from_zeta(z, 3, 3) is z


class TestMAq:
    def test_zero(self):
        assert ma_q_radial_integral(2, 1, TestFunction([0, 1], [0, 0])) == 0.0

    def test_jn(self, rng):
        z = _random_zeta(rng)
        assert ma_q_radial_integral(3, 3, z) == pytest.approx(kappa(3) * z(0))

    def test_plane(self):
        d = 1e-3
        z = TestFunction([0, 1, 1 + d], [1, 1, 0])
        assert ma_q_radial_integral(2, 1, z) == pytest.approx(np.pi * (1 + d / 2), rel=1e-12)
        assert abs(ma_q_radial_integral(2, 1, z) / np.pi - 1) < 1e-3


class TestDiscriminants:
    def test_identity(self):
        for n in (2, 3, 4):
            for j in range(n + 1):
                assert elementary_symmetric(np.eye(n), j) == pytest.approx(comb(n, j))

    def test_diagonal_discriminant(self, rng):
        B = rng.normal(size=(3, 3))
        A = B @ B.T
        assert mixed_discriminant([A, A, A]) == pytest.approx(np.linalg.det(A), rel=1e-10)

    def test_consistency(self, rng):
        B = rng.normal(size=(3, 3))
        A = B + B.T
        for j in range(4):
            D = mixed_discriminant([A] * j + [np.eye(3)] * (3 - j))
            assert elementary_symmetric(A, j) == pytest.approx(comb(3, j) * D, rel=1e-10, abs=1e-12)

    def test_radial_hessian(self, rng):
        psi = SmoothProfile.power(4)
        n, eps = 3, 1e-4
        for _ in range(5):
            x = rng.normal(size=n)
            f = lambda y: psi.value(np.linalg.norm(y))  # noqa: E731
            H = np.zeros((n, n))
            E = np.eye(n) * eps
            for a in range(n):
                for b in range(n):
                    H[a, b] = (f(x + E[a] + E[b]) - f(x + E[a] - E[b]) - f(x - E[a] + E[b]) + f(x - E[a] - E[b])) / (4 * eps ** 2)
            H = (H + H.T) / 2
            lam = psi.hessian_eigenvalues(np.linalg.norm(x), n)
            for j in range(n + 1):
                poly = np.poly(lam)
                assert elementary_symmetric(H, j) == pytest.approx((-1) ** j * poly[j], rel=1e-5, abs=1e-6)

    def test_nonsymmetric(self):
        with pytest.raises(ValueError):
            elementary_symmetric(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)


class TestHessianIntegral:
    @pytest.mark.parametrize("n", [2, 3])
    def test_quadratic(self, n, rng):
        z = _random_zeta(rng)
        base = n * kappa(n) * integrate.quad(lambda r: z(r) * r ** (n - 1), 0, z.support_bound,
                                             points=list(z.breaks), limit=200)[0]
        for j in range(n + 1):
            got = hessian_integral_radial(SmoothProfile.quadratic(), z, n, j)
            assert got == pytest.approx(comb(n, j) * base, rel=1e-8)

    def test_j0(self, rng):
        z = _random_zeta(rng)
        base = 2 * kappa(2) * integrate.quad(lambda r: z(r) * r, 0, z.support_bound, points=list(z.breaks))[0]
        assert hessian_integral_radial(SmoothProfile.power(4), z, 2, 0) == pytest.approx(base, rel=1e-8)

    def test_quartic_planar_quadrature(self):
        z = TestFunction.hat(1.0, 1.0)

        def integrand(y, x):
            H = 4 * (x * x + y * y) * np.eye(2) + 8 * np.outer([x, y], [x, y])
            return z(np.hypot(x, y)) * elementary_symmetric(H, 1)

        ref, _ = integrate.dblquad(integrand, -1, 1, lambda x: -np.sqrt(1 - x * x), lambda x: np.sqrt(1 - x * x),
                                   epsabs=1e-12, epsrel=1e-10)
        assert hessian_integral_radial(SmoothProfile.power(4), z, 2, 1) == pytest.approx(ref, rel=1e-6)


def _tangent_planes(value, d1, pts):
    r = np.linalg.norm(pts, axis=1)
    safe = np.where(r > 0, r, 1.0)
    g = (np.array([d1(x) for x in r]) / safe)[:, None] * pts
    vals = np.array([value(x) for x in r])
    return MaxAffine(g, vals - np.einsum("ij,ij->i", g, pts))


def _polar_nodes(segments, R=1.0):
    h, ang = R / segments, 4 * segments
    pts = [np.zeros((1, 2))]
    for k in range(1, segments + 2):
        th = (np.arange(ang) + 0.5 * (k % 2)) * 2 * np.pi / ang
        pts.append(k * h * np.column_stack([np.cos(th), np.sin(th)]))
    return np.vstack(pts)


class TestHessianLink:
    """C(n,j) ∫ zeta dMA(v[j], q[n-j]) against the Hessian integral, v, q as tangent-plane maxima."""

    @staticmethod
    def _link(segments, zeta):
        psi, q = SmoothProfile.power(4), SmoothProfile.quadratic()
        P = _polar_nodes(segments)
        v = _tangent_planes(psi.value, psi.d1, P)
        w = _tangent_planes(q.value, q.d1, P)
        vw = _tangent_planes(lambda r: psi.value(r) + q.value(r), lambda r: psi.d1(r) + q.d1(r), P)

        def I(f):
            mu = ma(f)
            return float(mu.masses @ zeta(np.linalg.norm(mu.locations, axis=1)))

        return {0: I(w), 1: comb(2, 1) * (I(vw) - I(v) - I(w)) / 2, 2: I(v)}

    def test_forty_segments_and_refinement(self):
        z = TestFunction.hat(1.0, 1.0)
        coarse, fine = self._link(40, z), self._link(80, z)
        for j in range(3):
            exact = hessian_integral_radial(SmoothProfile.power(4), z, 2, j)
            e40, e80 = abs(coarse[j] / exact - 1), abs(fine[j] / exact - 1)
            assert e40 < 0.01
            assert e80 < e40
