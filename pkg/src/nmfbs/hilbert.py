"""Weighted (lumped-mass) inner-product spaces.

A discretized L2 function is stored as a coefficient vector together with
the diagonal quadrature weights of its space. Every norm and inner product
used by the solver goes through this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["InnerProductSpace", "HilbertVec", "inner", "norm", "axpy"]


@dataclass(frozen=True, eq=False)
class InnerProductSpace:
    """Finite-dimensional space with inner product ``sum_i w_i x_i y_i``.

    Parameters
    ----------
    weights : array_like
        Strictly positive diagonal weights (cell measures).
    compensated : bool, optional
        Use compensated (``math.fsum``) summation in :func:`inner`.
    """

    weights: np.ndarray
    compensated: bool = False

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size < 1:
            raise ValueError("space dimension must be at least 1")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("all weights must be finite and strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, dim: int, weight: float = 1.0, **kw) -> "InnerProductSpace":
        if dim < 1:
            raise ValueError("space dimension must be at least 1")
        return cls(np.full(dim, float(weight)), **kw)

    @property
    def dim(self) -> int:
        return self.weights.size

    def element(self, coeffs=None) -> "HilbertVec":
        """Wrap ``coeffs`` (or zeros) as a vector of this space."""
        if coeffs is None:
            coeffs = np.zeros(self.dim)
        return HilbertVec(coeffs, self)

    def zero(self) -> "HilbertVec":
        return self.element()

    def __repr__(self):
        return f"InnerProductSpace(dim={self.dim})"


class HilbertVec:
    """Coefficient vector bound to an :class:`InnerProductSpace`.

    Arithmetic returns new vectors; coefficients are never modified in place
    by the public operations.
    """

    __slots__ = ("coeffs", "space")

    def __init__(self, coeffs, space: InnerProductSpace):
        c = np.array(coeffs, dtype=float).ravel()
        if c.size != space.dim:
            raise ValueError(f"coefficient length {c.size} does not match space dimension {space.dim}")
        self.coeffs = c
        self.space = space

    def _check(self, other: "HilbertVec"):
        if not isinstance(other, HilbertVec):
            raise TypeError(f"expected HilbertVec, got {type(other).__name__}")
        if other.space is not self.space:
            if other.space.dim != self.space.dim:
                raise ValueError(f"dimension mismatch: {self.space.dim} vs {other.space.dim}")
            if not np.array_equal(other.space.weights, self.space.weights):
                raise ValueError("vectors belong to spaces with different weights")

    def copy(self) -> "HilbertVec":
        return HilbertVec(self.coeffs.copy(), self.space)

    def __add__(self, other):
        self._check(other)
        return HilbertVec(self.coeffs + other.coeffs, self.space)

    def __sub__(self, other):
        self._check(other)
        return HilbertVec(self.coeffs - other.coeffs, self.space)

    def __neg__(self):
        return HilbertVec(-self.coeffs, self.space)

    def __mul__(self, a):
        return HilbertVec(float(a) * self.coeffs, self.space)

    __rmul__ = __mul__

    def __truediv__(self, a):
        return HilbertVec(self.coeffs / float(a), self.space)

    def __len__(self):
        return self.coeffs.size

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def __repr__(self):
        return f"HilbertVec(dim={self.coeffs.size})"


def inner(x: HilbertVec, y: HilbertVec) -> float:
    """Weighted inner product ``sum_i w_i x_i y_i``.

    The product ``x_i * y_i`` is formed before weighting, so swapping the
    arguments gives a bitwise-identical result.
    """
    x._check(y)
    terms = x.space.weights * (x.coeffs * y.coeffs)
    if x.space.compensated:
        return math.fsum(terms)
    return float(np.sum(terms))


def norm(x: HilbertVec) -> float:
    return math.sqrt(max(inner(x, x), 0.0))


def axpy(a: float, x: HilbertVec, y: HilbertVec) -> HilbertVec:
    """Return ``a*x + y``."""
    x._check(y)
    return HilbertVec(float(a) * x.coeffs + y.coeffs, x.space)
