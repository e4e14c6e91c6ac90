"""Semilinear parabolic control problem.

    min 1/2 ||y - y_d||^2_{L2(0,T;L2)} + lam ||u||_{L1(0,T;L1)}   s.t.
    y' - kappa Delta y + y^3 = u,  y = 0 on the boundary,  y(0) = y0,  ua <= u <= ub.

Time stepping is Crank-Nicolson for diffusion with a two-step Adams-Bashforth
treatment of the cubic term (explicit Euler on the first step). Controls are
piecewise constant on the ``nt`` time intervals; the cost uses the states at
the right endpoints ``t_1, ..., t_nt`` with weights ``h^2 dt``. The gradient
is the exact discrete adjoint of this scheme.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from ..composite import CompositeObjective
from ..errors import NumericError
from ..hilbert import HilbertVec, InnerProductSpace, inner
from ..prox import ProxOperator
from .grid import Grid2D, SPDSolver

__all__ = ["ParabolicProblem", "default_parabolic_target"]

BLOWUP = 1e8


def default_parabolic_target(grid: Grid2D, T: float, nt: int) -> np.ndarray:
    """``sin(2 pi x1) sin(2 pi x2) cos(2 pi t / T)`` at ``t_1..t_nt``, shape ``(nt, n*n)``."""
    x1, x2 = grid.coordinates()
    t = T * np.arange(1, nt + 1) / nt
    return np.cos(2 * np.pi * t / T)[:, None] * (np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2))[None, :]


class ParabolicProblem:
    def __init__(
        self,
        grid: Grid2D,
        T: float = 1.0,
        nt: int = 20,
        kappa: float = 1e-2,
        lam: float = 1e-2,
        ua: float = -100.0,
        ub: float = 100.0,
        y0=None,
        y_d=None,
        adjoint_sign: float = 1.0,
    ):
        if not kappa > 0 or not T > 0:
            raise ValueError("kappa and T must be positive")
        if int(nt) != nt or nt < 2:
            raise ValueError("nt must be an integer >= 2")
        self.grid = grid
        self.T = float(T)
        self.nt = int(nt)
        self.dt = self.T / self.nt
        self.kappa = float(kappa)
        N = grid.dim
        self.y0 = np.zeros(N) if y0 is None else np.asarray(y0, dtype=float).ravel()
        if self.y0.size != N:
            raise ValueError("y0 has the wrong size")
        yd = default_parabolic_target(grid, self.T, self.nt) if y_d is None else np.asarray(y_d, dtype=float)
        self.y_d = yd.reshape(self.nt, N)
        amp = max(float(np.max(np.abs(self.y0), initial=0.0)), float(np.max(np.abs(self.y_d))))
        if self.dt * 3.0 * amp**2 > 1.0:
            raise ValueError(f"time step too large for the explicit cubic term: dt*3*max|y|^2 = {self.dt * 3 * amp**2:.3g} > 1")
        self.space = InnerProductSpace.uniform(self.nt * N, grid.cell_weight * self.dt)
        self.prox_op = ProxOperator(self.space, sigma=0.0, lam=lam, ua=ua, ub=ub, require_sign_box=True)
        self.adjoint_sign = float(adjoint_sign)
        K = self.kappa * grid.laplacian()
        eye = sp.identity(N, format="csr")
        self._implicit = SPDSolver(eye / self.dt + 0.5 * K, grid.n)
        self._explicit = (eye / self.dt - 0.5 * K).tocsr()

    lam = property(lambda self: self.prox_op.lam)
    ua = property(lambda self: self.prox_op.ua)
    ub = property(lambda self: self.prox_op.ub)

    def control_array(self, u: HilbertVec) -> np.ndarray:
        return u.coeffs.reshape(self.nt, self.grid.dim)

    def state_solve(self, u: HilbertVec) -> np.ndarray:
        """March forward; returns the trajectory, shape ``(nt + 1, n*n)``."""
        U = self.control_array(u)
        Y = np.empty((self.nt + 1, self.grid.dim))
        Y[0] = self.y0
        cube_prev = None
        cube = self.y0**3
        for j in range(1, self.nt + 1):
            nonlin = cube if cube_prev is None else 1.5 * cube - 0.5 * cube_prev
            Y[j] = self._implicit(self._explicit @ Y[j - 1] - nonlin + U[j - 1])
            peak = float(np.max(np.abs(Y[j])))
            if not math.isfinite(peak) or peak > BLOWUP:
                raise NumericError(f"parabolic state blew up at step {j} (max |y| = {peak:.3e})")
            cube_prev, cube = cube, Y[j] ** 3
        return Y

    def adjoint_solve(self, Y: np.ndarray) -> np.ndarray:
        """Discrete adjoint of :meth:`state_solve`, marched backward from zero.

        Returns ``p`` at levels ``1..nt``, shape ``(nt, n*n)``, scaled so that
        the weighted gradient is ``-p``.
        """
        nt, N = self.nt, self.grid.dim
        P = np.zeros((nt + 3, N))  # P[j] for j = 1..nt, zero at nt+1 and nt+2
        for j in range(nt, 0, -1):
            rhs = self._explicit @ P[j + 1] - 3.0 * Y[j] ** 2 * (1.5 * P[j + 1] - 0.5 * P[j + 2]) - (Y[j] - self.y_d[j - 1])
            P[j] = self._implicit(rhs)
        return P[1 : nt + 1]

    def cost_from_state(self, Y: np.ndarray) -> float:
        d = HilbertVec((Y[1:] - self.y_d).ravel(), self.space)
        return 0.5 * inner(d, d)

    def cost(self, u: HilbertVec) -> float:
        return self.cost_from_state(self.state_solve(u))

    def reduced_gradient(self, u: HilbertVec) -> Tuple[float, HilbertVec]:
        Y = self.state_solve(u)
        P = self.adjoint_solve(Y)
        return self.cost_from_state(Y), HilbertVec(-self.adjoint_sign * P.ravel(), self.space)

    def objective(self) -> CompositeObjective:
        return CompositeObjective(
            smooth_eval=self.cost,
            smooth_grad=lambda u: self.reduced_gradient(u)[1],
            nonsmooth=self.prox_op,
            value_and_grad=self.reduced_gradient,
        )

    def zero_control(self) -> HilbertVec:
        return self.space.zero()
