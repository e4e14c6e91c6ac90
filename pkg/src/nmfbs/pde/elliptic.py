"""Semilinear elliptic control problem.

    min 1/2 ||y - y_d||^2 + sigma/2 ||u||^2 + lam ||u||_L1   s.t.
    -kappa Delta y + exp(y) = u in (0,1)^2,  y = 0 on the boundary,  ua <= u <= ub,

discretized by five-point finite differences with lumped-mass weights h^2.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from ..composite import CompositeObjective
from ..errors import NewtonDivergedError, NumericError
from ..hilbert import HilbertVec, inner, norm
from ..prox import ProxOperator
from .grid import Grid2D, SPDSolver

__all__ = ["EllipticProblem", "default_elliptic_target"]

log = logging.getLogger(__name__)

STAGNATION_LEVEL = 1e-9


def default_elliptic_target(grid: Grid2D) -> np.ndarray:
    x1, x2 = grid.coordinates()
    return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)


def _diagonal_positions(m: sp.csc_matrix) -> np.ndarray:
    pos = np.empty(m.shape[0], dtype=np.int64)
    for col in range(m.shape[1]):
        start, stop = m.indptr[col], m.indptr[col + 1]
        rows = m.indices[start:stop]
        hit = np.nonzero(rows == col)[0]
        if hit.size != 1:
            raise ValueError("stiffness matrix lacks a stored diagonal entry")
        pos[col] = start + hit[0]
    return pos


class _StateCache:
    """Last converged state, used as Newton warm start. One per objective."""

    def __init__(self):
        self.u = None
        self.y = None
        self.newton_steps = []

    def lookup(self, u: np.ndarray):
        if self.u is not None and np.array_equal(self.u, u):
            return self.y
        return None

    def store(self, u: np.ndarray, y: np.ndarray):
        self.u = u.copy()
        self.y = y.copy()


class EllipticProblem:
    """Discretized elliptic problem exposing cost, adjoint gradient and prox."""

    def __init__(
        self,
        grid: Grid2D,
        kappa: float = 1e-2,
        sigma: float = 1e-4,
        lam: float = 1e-3,
        ua: float = -3.0,
        ub: float = 2.0,
        y_d=None,
        newton_tol: float = 1e-12,
        newton_max_iter: int = 50,
        adjoint_sign: float = 1.0,
    ):
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        self.grid = grid
        self.kappa = float(kappa)
        self.space = grid.space()
        self.prox_op = ProxOperator(self.space, sigma=sigma, lam=lam, ua=ua, ub=ub, require_sign_box=True)
        yd = default_elliptic_target(grid) if y_d is None else np.asarray(getattr(y_d, "coeffs", y_d), dtype=float).ravel()
        if yd.size != grid.dim:
            raise ValueError(f"y_d has {yd.size} values, grid needs {grid.dim}")
        self.y_d = HilbertVec(yd, self.space)
        self.newton_tol = float(newton_tol)
        self.newton_max_iter = int(newton_max_iter)
        self.adjoint_sign = float(adjoint_sign)
        self.stiffness = (self.kappa * grid.laplacian()).tocsc()
        self.stiffness.sort_indices()
        self._diag_pos = _diagonal_positions(self.stiffness)

    sigma = property(lambda self: self.prox_op.sigma)
    lam = property(lambda self: self.prox_op.lam)
    ua = property(lambda self: self.prox_op.ua)
    ub = property(lambda self: self.prox_op.ub)

    def _residual_norm(self, r: np.ndarray) -> float:
        return math.sqrt(self.grid.cell_weight * float(np.dot(r, r)))

    def jacobian(self, y: np.ndarray) -> sp.csc_matrix:
        """``kappa A + diag(exp(y))``, assembled by patching the stored diagonal."""
        J = self.stiffness.copy()
        J.data[self._diag_pos] += np.exp(y)
        return J

    def state_solve(self, u: HilbertVec, warm_start: Optional[HilbertVec] = None, cache: Optional[_StateCache] = None) -> HilbertVec:
        """Newton's method with the exact Jacobian ``kappa A + diag(exp(y))``."""
        uc = u.coeffs
        if cache is not None:
            hit = cache.lookup(uc)
            if hit is not None:
                return HilbertVec(hit, self.space)
            if warm_start is None and cache.y is not None:
                warm_start = HilbertVec(cache.y, self.space)
        y = np.zeros(self.grid.dim) if warm_start is None else warm_start.coeffs.copy()
        history = []
        for it in range(self.newton_max_iter + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                r = self.stiffness @ y + np.exp(y) - uc
            rn = self._residual_norm(r)
            history.append(rn)
            if not math.isfinite(rn):
                raise NumericError("non-finite residual in elliptic Newton solve")
            if rn <= self.newton_tol:
                break
            if rn <= STAGNATION_LEVEL and len(history) >= 2 and rn > 0.5 * history[-2]:
                # at the rounding floor of the residual evaluation; more steps cannot help
                log.debug("newton stagnated at residual %.3e", rn)
                break
            if it == self.newton_max_iter:
                raise NewtonDivergedError(f"Newton did not converge in {self.newton_max_iter} steps (residual {rn:.3e})")
            y = y + SPDSolver(self.jacobian(y), self.grid.n)(-r)
        if len(history) >= 3 and history[-2] > 0:
            log.debug("newton tail ratio r_k+1/r_k^2 = %.3e", history[-1] / history[-2] ** 2)
        if cache is not None:
            cache.store(uc, y)
            cache.newton_steps.append(len(history) - 1)
        return HilbertVec(y, self.space)

    def adjoint_solve(self, y: HilbertVec, y_d: Optional[HilbertVec] = None) -> HilbertVec:
        """Solve ``(kappa A + diag(exp(y))) p = -(y - y_d)``."""
        yd = self.y_d if y_d is None else y_d
        p = SPDSolver(self.jacobian(y.coeffs), self.grid.n)(-(y.coeffs - yd.coeffs))
        return HilbertVec(p, self.space)

    def cost(self, u: HilbertVec, cache: Optional[_StateCache] = None) -> float:
        d = self.state_solve(u, cache=cache) - self.y_d
        return 0.5 * inner(d, d)

    def reduced_gradient(self, u: HilbertVec, cache: Optional[_StateCache] = None) -> Tuple[float, HilbertVec]:
        """Cost and gradient ``-p(u)``: one state solve plus one adjoint solve."""
        y = self.state_solve(u, cache=cache)
        d = y - self.y_d
        p = self.adjoint_solve(y)
        return 0.5 * inner(d, d), HilbertVec(-self.adjoint_sign * p.coeffs, self.space)

    def objective(self) -> CompositeObjective:
        """Composite objective with its own warm-start cache."""
        cache = _StateCache()
        obj = CompositeObjective(
            smooth_eval=lambda u: self.cost(u, cache=cache),
            smooth_grad=lambda u: self.reduced_gradient(u, cache=cache)[1],
            nonsmooth=self.prox_op,
            value_and_grad=lambda u: self.reduced_gradient(u, cache=cache),
        )
        obj.state_cache = cache
        return obj

    def curvature_probe(self, u_star: HilbertVec, h: HilbertVec) -> float:
        """Second derivative of the smooth cost at ``u_star`` in direction ``h``.

        ``||y_h||^2 + sum_i w_i p_i exp(y_i) y_h_i^2`` with ``y_h`` the
        solution of the linearized state equation.
        """
        y = self.state_solve(u_star)
        p = self.adjoint_solve(y)
        yh = HilbertVec(SPDSolver(self.jacobian(y.coeffs), self.grid.n)(h.coeffs), self.space)
        ey = np.exp(y.coeffs)
        return inner(yh, yh) + float(np.sum(self.space.weights * p.coeffs * ey * yh.coeffs**2))

    def convexity_margin(self, u_star: HilbertVec, h: HilbertVec) -> float:
        """``sigma ||h||^2 + f''(u*)(h, h)``; positive values indicate local strong convexity along ``h``."""
        return self.sigma * norm(h) ** 2 + self.curvature_probe(u_star, h)
