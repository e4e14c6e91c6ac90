"""Central finite-difference checks of reduced gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from ..hilbert import HilbertVec, inner

__all__ = ["DirectionCheck", "directional_fd_check"]


@dataclass(frozen=True)
class DirectionCheck:
    index: int
    fd: float
    adjoint: float
    rel_error: float

    def passed(self, tol: float) -> bool:
        return self.rel_error <= tol


def directional_fd_check(
    cost: Callable[[HilbertVec], float],
    grad: HilbertVec,
    u: HilbertVec,
    directions: List[HilbertVec],
    eps: float,
) -> List[DirectionCheck]:
    """Compare ``(f(u+eps h) - f(u-eps h)) / (2 eps)`` with ``(grad, h)``."""
    out = []
    for i, h in enumerate(directions):
        fp = cost(HilbertVec(u.coeffs + eps * h.coeffs, u.space))
        fm = cost(HilbertVec(u.coeffs - eps * h.coeffs, u.space))
        fd = (fp - fm) / (2.0 * eps)
        ad = inner(grad, h)
        rel = abs(fd - ad) / max(abs(ad), np.finfo(float).tiny)
        out.append(DirectionCheck(i, fd, ad, rel))
    return out
