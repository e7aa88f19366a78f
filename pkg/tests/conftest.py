"""Shared helpers: random normalized instances and ball-uniform queries."""

import numpy as np
import pytest

from entot.measures import (
    DiscreteMeasure,
    apply_normalization,
    fit_normalization,
)


def random_weights(rng, size):
    w = rng.uniform(0.2, 1.0, size=size)
    return w / w.sum()


def random_instance(rng, max_size=50, max_dim=4, weighted=True):
    """A random pair of measures jointly normalized into the radius-1/2 ball."""
    m = int(rng.integers(2, max_size + 1))
    k = int(rng.integers(2, max_size + 1))
    d = int(rng.integers(1, max_dim + 1))
    x = rng.normal(size=(m, d))
    y = rng.normal(size=(k, d))
    if weighted:
        mu = DiscreteMeasure(points=x, weights=random_weights(rng, m))
        nu = DiscreteMeasure(points=y, weights=random_weights(rng, k))
    else:
        mu = DiscreteMeasure(points=x, weights=np.full(m, 1.0 / m))
        nu = DiscreteMeasure(points=y, weights=np.full(k, 1.0 / k))
    t = fit_normalization([mu, nu])
    return apply_normalization(t, mu), apply_normalization(t, nu)


def ball_points(rng, n, d, radius=0.5):
    """n points drawn uniformly from the centered ball of the given radius."""
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return v * r[:, None]


def symmetric_two_atom(a=0.25):
    """The 1-d two-atom instance {-a, a} with uniform weights on both sides."""
    pts = np.array([[-a], [a]])
    w = np.array([0.5, 0.5])
    return DiscreteMeasure(points=pts, weights=w), DiscreteMeasure(points=pts.copy(), weights=w)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make
