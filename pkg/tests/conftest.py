import numpy as np
import pytest

from convkin import EpiPolyhedral, MaxAffine, Polytope
from convkin.monge_ampere import TestFunction


def square(lo=0.0, hi=1.0):
    return Polytope([[lo, lo], [hi, lo], [lo, hi], [hi, hi]])


def cube(lo=0.0, hi=1.0):
    return Polytope([[a, b, c] for a in (lo, hi) for b in (lo, hi) for c in (lo, hi)])


def random_polygon(rng, k=7, scale=1.0):
    return Polytope(scale * rng.normal(size=(k, 2)))


def random_epi(rng, k=5, n=2):
    return EpiPolyhedral(rng.uniform(-1, 1, size=(k, n)), rng.uniform(0, 1, k))


def random_max_affine(rng, k=10, n=2):
    return MaxAffine(rng.normal(size=(k, n)), rng.normal(size=k))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def alpha():
    return TestFunction([0.0, 0.5, 1.5], [1.0, 0.8, 0.0])


def bbox(f):
    pts = f.locations if hasattr(f, "locations") else f.vertices
    return pts.min(axis=0), pts.max(axis=0)


def same_on_grid(f, g, boxes, tol=1e-9):
    """Compare two extended-valued functions on the deterministic 33^n grid."""
    from convkin.functions import evaluation_grid

    x = evaluation_grid(boxes)
    a, b = f(x), g(x)
    fa, fb = np.isfinite(a), np.isfinite(b)
    if not np.array_equal(fa, fb):
        return False
    return bool(np.all(np.abs(a[fa] - b[fb]) <= tol * (1 + np.abs(a[fa]))))
