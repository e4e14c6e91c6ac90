"""Barzilai-Borwein type initial step parameters.

Rules ending in ``a`` use differences of ``grad f``; rules ending in ``b``
use differences of the gradient mapping ``G_{alpha_{k-1}}``. ``ABB`` rules
take the ``1`` quotient on even ``k`` and the ``2`` quotient on odd ``k``.
All quotients estimate curvature, i.e. they are inverse step lengths.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .hilbert import HilbertVec, inner

__all__ = ["StepRule", "StepHistory", "bb_candidate", "clamp_initial"]

_TINY = 1e-300


class StepRule(str, enum.Enum):
    FIXED = "fixed"
    BB1A = "bb1a"
    BB2A = "bb2a"
    ABBA = "abba"
    BB1B = "bb1b"
    BB2B = "bb2b"
    ABBB = "abbb"

    @classmethod
    def parse(cls, name: Union[str, "StepRule"]) -> "StepRule":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown step rule {name!r}; expected one of: {valid}") from None

    @property
    def uses_gmap(self) -> bool:
        return self in (StepRule.BB1B, StepRule.BB2B, StepRule.ABBB)

    def quotient(self, k: int) -> Optional[int]:
        """Which Rayleigh quotient (1 or 2) the rule uses at iteration ``k``."""
        if self is StepRule.FIXED:
            return None
        if self in (StepRule.BB1A, StepRule.BB1B):
            return 1
        if self in (StepRule.BB2A, StepRule.BB2B):
            return 2
        return 1 if k % 2 == 0 else 2


@dataclass(frozen=True)
class StepHistory:
    """Data kept from the previous accepted iteration ``k - 1``."""

    prev_u: HilbertVec
    prev_grad: HilbertVec
    prev_gmap: HilbertVec
    prev_alpha: float
    iter_index: int


def _quotient(which: int, s: HilbertVec, y: HilbertVec) -> Optional[float]:
    if which == 1:
        num, den = inner(s, y), inner(s, s)
    else:
        num, den = inner(y, y), inner(s, y)
    if not math.isfinite(den) or abs(den) <= _TINY:
        return None
    val = num / den
    if not math.isfinite(val) or val <= 0.0:
        return None
    return val


def bb_candidate(
    rule: StepRule,
    hist: StepHistory,
    u_k: HilbertVec,
    grad_k: HilbertVec,
    gmap_prev_alpha_at_uk: Union[HilbertVec, Callable[[], HilbertVec], None] = None,
) -> Optional[float]:
    """BB quotient at iteration ``k = hist.iter_index``; ``None`` if undefined.

    ``gmap_prev_alpha_at_uk`` is ``G_{alpha_{k-1}}(u_k)`` or a zero-argument
    callable producing it; it is only touched by the ``b`` rules.
    """
    rule = StepRule.parse(rule)
    which = rule.quotient(hist.iter_index)
    if which is None:
        return None
    s = u_k - hist.prev_u
    if rule.uses_gmap:
        g_now = gmap_prev_alpha_at_uk() if callable(gmap_prev_alpha_at_uk) else gmap_prev_alpha_at_uk
        if g_now is None:
            raise ValueError("b-type rules need G_{alpha_{k-1}}(u_k)")
        y = g_now - hist.prev_gmap
    else:
        y = grad_k - hist.prev_grad
    return _quotient(which, s, y)


def clamp_initial(candidate: Optional[float], fallback: float, alpha_lb: float, alpha_ub: float) -> float:
    """Project the candidate (or the fallback when undefined) onto ``[alpha_lb, alpha_ub]``."""
    if not 0 < alpha_lb < alpha_ub:
        raise ValueError(f"need 0 < alpha_lb < alpha_ub, got {alpha_lb}, {alpha_ub}")
    val = fallback if candidate is None else candidate
    return max(alpha_lb, min(alpha_ub, val))
