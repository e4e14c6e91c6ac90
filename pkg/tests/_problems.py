"""Shared generators of random composite test instances."""

import numpy as np

from nmfbs.synthetic import QuadraticL1Problem


def random_quadratic(rng, dim=None, strongly_convex=True, box=True):
    dim = int(rng.integers(1, 12)) if dim is None else dim
    lo = 0.5 if strongly_convex else 0.0
    d = rng.uniform(lo, 6.0, dim)
    c = rng.uniform(-4.0, 4.0, dim)
    sigma = float(rng.choice([0.0, rng.uniform(1e-4, 1.0)]))
    lam = float(rng.uniform(0.0, 1.0))
    ua, ub = (-3.0, 2.0) if box else (-np.inf, np.inf)
    w = rng.uniform(0.2, 3.0, dim)
    return QuadraticL1Problem(d, c, sigma=sigma, lam=lam, ua=ua, ub=ub, weights=w)


def random_feasible(rng, prob):
    lo = max(prob.ua, -5.0)
    hi = min(prob.ub, 5.0)
    return prob.space.element(rng.uniform(lo, hi, prob.dim))


def log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))
