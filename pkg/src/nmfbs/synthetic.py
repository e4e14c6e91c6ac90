"""Separable quadratic + L1 + box test problems with closed-form solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .composite import CompositeObjective
from .hilbert import HilbertVec, InnerProductSpace
from .prox import ProxOperator

__all__ = ["QuadraticL1Problem"]


@dataclass(frozen=True, eq=False)
class QuadraticL1Problem:
    """``f(u) = 1/2 (u - c, D (u - c))_H`` with diagonal ``D >= 0``.

    The gradient in the weighted space is ``D (u - c)``, so ``L = max D``.
    """

    hess_diag: np.ndarray
    center: np.ndarray
    sigma: float = 0.0
    lam: float = 0.0
    ua: float = -math.inf
    ub: float = math.inf
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        d = np.asarray(self.hess_diag, dtype=float).ravel()
        c = np.asarray(self.center, dtype=float).ravel()
        if d.shape != c.shape:
            raise ValueError("hess_diag and center must have equal length")
        if np.any(d < 0):
            raise ValueError("hess_diag must be nonnegative")
        w = np.ones_like(d) if self.weights is None else np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "hess_diag", d)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "space", InnerProductSpace(w))
        object.__setattr__(self, "prox_op", ProxOperator(self.space, self.sigma, self.lam, self.ua, self.ub))

    @classmethod
    def random(cls, dim: int, seed: int = 0, d_min: float = 0.1, d_max: float = 10.0,
               lam: float = 0.1, sigma: float = 0.0, ua: float = -3.0, ub: float = 2.0,
               random_weights: bool = False) -> "QuadraticL1Problem":
        rng = np.random.default_rng(seed)
        d = np.exp(rng.uniform(math.log(d_min), math.log(d_max), dim))
        c = rng.uniform(-4.0, 4.0, dim)
        w = rng.uniform(0.5, 2.0, dim) if random_weights else None
        return cls(d, c, sigma=sigma, lam=lam, ua=ua, ub=ub, weights=w)

    @property
    def dim(self) -> int:
        return self.hess_diag.size

    @property
    def lipschitz(self) -> float:
        return float(np.max(self.hess_diag))

    def f(self, u: HilbertVec) -> float:
        r = u.coeffs - self.center
        return 0.5 * float(np.sum(self.weights * (self.hess_diag * r * r)))

    def grad(self, u: HilbertVec) -> HilbertVec:
        return HilbertVec(self.hess_diag * (u.coeffs - self.center), self.space)

    def objective(self) -> CompositeObjective:
        L = self.lipschitz
        return CompositeObjective(self.f, self.grad, self.prox_op, lipschitz_grad=L if L > 0 else None)

    def minimizer(self) -> HilbertVec:
        """Coordinatewise minimizer of ``d/2 (v-c)^2 + sigma/2 v^2 + lam |v|`` over the box."""
        d, c = self.hess_diag, self.center
        dc = d * c
        curv = d + self.sigma
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.sign(dc) * np.maximum(np.abs(dc) - self.lam, 0.0) / curv
        v = np.where(curv > 0, v, 0.0)
        return HilbertVec(np.clip(v, self.ua, self.ub), self.space)

    def optimal_value(self) -> float:
        u = self.minimizer()
        c = u.coeffs
        return self.f(u) + 0.5 * self.sigma * float(np.sum(self.weights * c * c)) + self.lam * float(np.sum(self.weights * np.abs(c)))
