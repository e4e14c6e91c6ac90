"""Pointwise proximal operators of ``sigma/2 |u|^2 + lam |u|_1 + indicator[ua, ub]``.

The scaling convention throughout the package: ``alpha`` is an inverse step
length and ``prox_apply(op, alpha, x)`` returns

    argmin_v  phi(v) + (alpha/2) |v - x|^2 .
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .hilbert import HilbertVec, InnerProductSpace

__all__ = ["ProxVariant", "ProxOperator", "prox_apply", "prox_value", "prox_oracle_1d", "shrink_clamp"]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ProxVariant(enum.Enum):
    ZERO = "zero"
    BOX_ONLY = "box"
    L1_BOX = "l1_box"
    L2_L1_BOX = "l2_l1_box"


@dataclass(frozen=True)
class ProxOperator:
    """Nonsmooth part ``sigma/2 ||u||^2 + lam ||u||_L1 + delta_[ua, ub](u)``.

    ``ua = -inf`` / ``ub = +inf`` drop the corresponding bound. Set
    ``require_sign_box`` to enforce ``ua < 0 < ub`` as the PDE problems do.
    """

    space: InnerProductSpace
    sigma: float = 0.0
    lam: float = 0.0
    ua: float = -math.inf
    ub: float = math.inf
    require_sign_box: bool = False

    def __post_init__(self):
        if self.sigma < 0 or self.lam < 0:
            raise ValueError("sigma and lam must be nonnegative")
        if math.isnan(self.ua) or math.isnan(self.ub):
            raise ValueError("box bounds must not be NaN")
        if not self.ua < self.ub:
            raise ValueError(f"empty box: ua={self.ua} must be < ub={self.ub}")
        if self.require_sign_box and not (self.ua < 0.0 < self.ub):
            raise ValueError("box must satisfy ua < 0 < ub")

    @property
    def variant(self) -> ProxVariant:
        boxed = math.isfinite(self.ua) or math.isfinite(self.ub)
        if self.sigma > 0:
            return ProxVariant.L2_L1_BOX
        if self.lam > 0:
            return ProxVariant.L1_BOX
        return ProxVariant.BOX_ONLY if boxed else ProxVariant.ZERO

    def is_zero(self) -> bool:
        return self.variant is ProxVariant.ZERO


def shrink_clamp(x, alpha: float, sigma: float, lam: float, ua: float, ub: float):
    """Closed-form scalar prox, vectorized over ``x``: shrink, then clamp."""
    c1 = 1.0 + sigma / alpha
    c2 = lam / alpha
    x = np.asarray(x, dtype=float)
    v = np.where(x > c2, (x - c2) / c1, np.where(x < -c2, (x + c2) / c1, 0.0))
    return np.minimum(np.maximum(v, ua), ub)


def prox_apply(op: ProxOperator, alpha: float, u: HilbertVec) -> HilbertVec:
    """Apply ``prox_{(1/alpha) phi}`` componentwise.

    The diagonal weights cancel pointwise, so the result does not depend on
    them.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if op.variant is ProxVariant.ZERO:
        return u.copy()
    return HilbertVec(shrink_clamp(u.coeffs, alpha, op.sigma, op.lam, op.ua, op.ub), u.space)


def prox_value(op: ProxOperator, u: HilbertVec) -> float:
    """Evaluate the nonsmooth part; ``+inf`` outside the box."""
    c = u.coeffs
    if np.any(c < op.ua) or np.any(c > op.ub):
        return math.inf
    w = u.space.weights
    val = 0.0
    if op.sigma:
        val += 0.5 * op.sigma * float(np.sum(w * (c * c)))
    if op.lam:
        val += op.lam * float(np.sum(w * np.abs(c)))
    return val


def _scalar_objective_slope(c: float, d: float, x: float, alpha: float, sigma: float, lam: float) -> float:
    # sign of q(c) - q(d) divided by (c - d), for q(v) = sigma/2 v^2 + lam|v| + alpha/2 (v-x)^2;
    # the factored form avoids the cancellation of subtracting two nearly equal values
    kink = (abs(c) - abs(d)) / (c - d)
    return 0.5 * sigma * (c + d) + lam * kink + 0.5 * alpha * (c + d - 2.0 * x)


def prox_oracle_1d(op: ProxOperator, alpha: float, x: float, tol: float = 1e-10) -> float:
    """Golden-section minimization of the scalar prox objective over ``[ua, ub]``.

    Slow validation oracle; it never calls the closed form.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not (math.isfinite(op.ua) and math.isfinite(op.ub)):
        raise ValueError("the golden-section oracle needs a finite box")
    a, b = float(op.ua), float(op.ub)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    while b - a > tol:
        # q(c) < q(d) with c < d: the minimizer lies in [a, d]
        if _scalar_objective_slope(c, d, x, alpha, op.sigma, op.lam) > 0.0:
            b, d = d, c
            c = b - _GOLDEN * (b - a)
        else:
            a, c = c, d
            d = a + _GOLDEN * (b - a)
        if c >= d:
            break
    return 0.5 * (a + b)
