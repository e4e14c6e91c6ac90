"""Uniform grid on the unit square and sparse linear algebra helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NumericError
from ..hilbert import InnerProductSpace

__all__ = ["Grid2D", "SPDSolver", "DIRECT_MAX_N"]

DIRECT_MAX_N = 128


@dataclass(frozen=True)
class Grid2D:
    """``n x n`` interior nodes of (0,1)^2 with spacing ``h = 1/(n+1)``.

    Node ``(i, j)`` sits at ``x1 = (j+1) h``, ``x2 = (i+1) h`` and has flat
    index ``i*n + j`` (row-major).
    """

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 interior nodes per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def dim(self) -> int:
        return self.n * self.n

    @property
    def cell_weight(self) -> float:
        return self.h * self.h

    def coordinates(self):
        x = (np.arange(self.n) + 1) * self.h
        x1, x2 = np.meshgrid(x, x)
        return x1.ravel(), x2.ravel()

    def space(self) -> InnerProductSpace:
        return InnerProductSpace.uniform(self.dim, self.cell_weight)

    def laplacian(self) -> sp.csr_matrix:
        """Five-point ``-Delta_h`` with homogeneous Dirichlet data (SPD)."""
        n = self.n
        t = sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
        eye = sp.identity(n)
        return ((sp.kron(eye, t) + sp.kron(t, eye)) / self.cell_weight).tocsr()

    def smallest_laplacian_eigenvalue(self) -> float:
        return 2.0 * 4.0 / self.cell_weight * math.sin(math.pi * self.h / 2.0) ** 2


class SPDSolver:
    """Solve with a fixed SPD sparse matrix.

    Sparse LU for grids up to ``DIRECT_MAX_N`` nodes per axis, Jacobi
    preconditioned CG (relative tolerance 1e-12) beyond.
    """

    def __init__(self, matrix: sp.spmatrix, n: int):
        self.matrix = matrix.tocsc()
        self.direct = n <= DIRECT_MAX_N
        if self.direct:
            try:
                self._lu = spla.splu(
                    self.matrix, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                    options={"SymmetricMode": True},
                )
            except RuntimeError as exc:
                raise NumericError(f"sparse factorization failed: {exc}") from exc
        else:
            dinv = 1.0 / self.matrix.diagonal()
            self._prec = spla.LinearOperator(self.matrix.shape, matvec=lambda x: dinv * x)

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        if self.direct:
            x = self._lu.solve(rhs)
        else:
            x, info = spla.cg(self.matrix, rhs, rtol=1e-12, atol=0.0, M=self._prec, maxiter=10 * rhs.size)
            if info != 0:
                raise NumericError(f"conjugate gradient did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise NumericError("linear solve produced non-finite values")
        return x
