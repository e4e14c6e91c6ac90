"""Composite objectives ``F = f + phi`` and the prox-grad machinery.

``T_alpha(u) = prox_{(1/alpha) phi}(u - grad f(u) / alpha)`` is the prox-grad
point and ``G_alpha(u) = alpha (u - T_alpha(u))`` the gradient mapping; its
norm is the stationarity measure used by the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional


from .errors import NumericError
from .hilbert import HilbertVec, InnerProductSpace, inner
from .prox import ProxOperator, prox_apply, prox_value

__all__ = [
    "CompositeObjective",
    "ProxGradResult",
    "prox_grad",
    "model_value",
    "objective_value",
]


class CompositeObjective:
    """Smooth part (value and gradient) paired with a prox-friendly part.

    Parameters
    ----------
    smooth_eval : callable
        ``u -> f(u)``.
    smooth_grad : callable
        ``u -> grad f(u)`` as a :class:`HilbertVec` (Riesz representative in
        the weighted space).
    nonsmooth : ProxOperator
    lipschitz_grad : float, optional
        Known Lipschitz constant of ``grad f``.
    value_and_grad : callable, optional
        ``u -> (f(u), grad f(u))`` when both come out of one computation, as
        for the PDE objectives.
    """

    def __init__(
        self,
        smooth_eval: Callable[[HilbertVec], float],
        smooth_grad: Callable[[HilbertVec], HilbertVec],
        nonsmooth: ProxOperator,
        lipschitz_grad: Optional[float] = None,
        value_and_grad: Optional[Callable[[HilbertVec], tuple]] = None,
    ):
        if lipschitz_grad is not None and not lipschitz_grad > 0:
            raise ValueError("lipschitz_grad must be positive when given")
        self.smooth_eval = smooth_eval
        self.smooth_grad = smooth_grad
        self.nonsmooth = nonsmooth
        self.lipschitz_grad = lipschitz_grad
        self._value_and_grad = value_and_grad

    @property
    def space(self) -> InnerProductSpace:
        return self.nonsmooth.space

    def value_and_grad(self, u: HilbertVec):
        if self._value_and_grad is not None:
            return self._value_and_grad(u)
        return self.smooth_eval(u), self.smooth_grad(u)

    def __call__(self, u: HilbertVec) -> float:
        return objective_value(self, u)


@dataclass(frozen=True)
class ProxGradResult:
    t: HilbertVec
    g: HilbertVec
    alpha: float
    f_grad_at_u: HilbertVec


def prox_grad(
    obj: CompositeObjective,
    u: HilbertVec,
    alpha: float,
    grad_u: Optional[HilbertVec] = None,
    iteration: Optional[int] = None,
) -> ProxGradResult:
    """Compute ``T_alpha(u)`` and ``G_alpha(u)``.

    When ``grad_u`` is supplied no gradient is evaluated, which is what keeps
    the solver's gradient counter at one per outer iteration.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if grad_u is None:
        grad_u = obj.smooth_grad(u)
    if not grad_u.is_finite():
        where = "" if iteration is None else f" at iteration {iteration}"
        raise NumericError(f"non-finite gradient{where}")
    forward = HilbertVec(u.coeffs - grad_u.coeffs / alpha, u.space)
    t = prox_apply(obj.nonsmooth, alpha, forward)
    g = HilbertVec(alpha * (u.coeffs - t.coeffs), u.space)
    return ProxGradResult(t=t, g=g, alpha=alpha, f_grad_at_u=grad_u)


def objective_value(obj: CompositeObjective, u: HilbertVec) -> float:
    """``f(u) + phi(u)``; ``+inf`` when ``u`` leaves the box (f is not evaluated)."""
    phi = prox_value(obj.nonsmooth, u)
    if math.isinf(phi):
        return math.inf
    return obj.smooth_eval(u) + phi


def model_value(obj: CompositeObjective, w: HilbertVec, u: HilbertVec, alpha: float) -> float:
    """Quadratic model ``Q_alpha(w, u)`` whose minimizer over ``w`` is ``T_alpha(u)``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    fu, gu = obj.value_and_grad(u)
    d = w - u
    return fu + inner(gu, d) + 0.5 * alpha * inner(d, d) + prox_value(obj.nonsmooth, w)
