"""Nonmonotone forward-backward splitting with BB initial steps.

One outer iteration ``k``:

1. evaluate ``f(u_k)`` and ``grad f(u_k)`` (the only gradient-like evaluation);
2. pick ``alpha_init`` from the BB rule, clamped to ``[alpha_lb, alpha_ub]``;
3. stop if ``||G_{alpha_init}(u_k)|| <= tol``;
4. backtrack ``alpha_k = alpha_init * eta**i`` until
   ``F(T_{alpha_k}(u_k)) <= max_{0<=j<=m(k)} F(u_{k-j}) - delta/alpha_k ||G_{alpha_k}(u_k)||^2``;
5. ``u_{k+1} = T_{alpha_k}(u_k)``.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import logging
import math
import time
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .composite import CompositeObjective, ProxGradResult, prox_grad
from .errors import NumericError
from .hilbert import HilbertVec, inner, norm
from .prox import prox_apply, prox_value
from .stepsize import StepHistory, StepRule, bb_candidate, clamp_initial

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "SolverResult",
    "Status",
    "BacktrackExhausted",
    "TRACE_HEADER",
    "solve",
    "nonmonotone_accept",
    "memory_len",
    "backtrack",
    "ell_nu_indices",
    "write_trace_csv",
    "read_trace_csv",
    "format_float",
]

log = logging.getLogger(__name__)

TRACE_HEADER = ("k", "f_value", "gmap_norm", "alpha", "backtracks", "f_evals", "grad_evals", "wall_ms")


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    BACKTRACK_EXHAUSTED = "backtrack_exhausted"
    NUMERIC_ERROR = "numeric_error"


class BacktrackExhausted(RuntimeError):
    def __init__(self, msg: str, f_evals: int):
        super().__init__(msg)
        self.f_evals = f_evals


@dataclass
class SolverConfig:
    delta: float = 0.9
    m_max: int = 8
    eta: float = 8.0
    alpha_lb: float = 1e-4
    alpha_ub: float = 1e2
    alpha0: float = 10.0
    tol: float = 1e-6
    max_iter: int = 10000
    rule: StepRule = StepRule.ABBB
    linesearch_enabled: bool = True
    max_backtracks: int = 60
    store_iterates: bool = False

    def __post_init__(self):
        self.rule = StepRule.parse(self.rule)
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if int(self.m_max) != self.m_max or self.m_max < 0:
            raise ValueError(f"m_max must be a nonnegative integer, got {self.m_max}")
        self.m_max = int(self.m_max)
        if not self.eta > 1.0:
            raise ValueError(f"eta must exceed 1, got {self.eta}")
        if not 0.0 < self.alpha_lb < self.alpha_ub:
            raise ValueError(f"need 0 < alpha_lb < alpha_ub, got {self.alpha_lb}, {self.alpha_ub}")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise ValueError("max_iter and max_backtracks must be positive")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    f_value: float
    gmap_norm: float
    alpha_k: float
    backtracks: int
    cum_f_evals: int
    cum_grad_evals: int
    wall_ms: float

    def as_row(self, timing: bool = True) -> list:
        return [
            str(self.k),
            format_float(self.f_value),
            format_float(self.gmap_norm),
            format_float(self.alpha_k),
            str(self.backtracks),
            str(self.cum_f_evals),
            str(self.cum_grad_evals),
            format_float(self.wall_ms if timing else 0.0),
        ]


@dataclass
class SolverResult:
    u_final: HilbertVec
    status: Status
    trace: List[IterationRecord]
    memory_window: List[float]
    message: str = ""
    iterates: Optional[List[HilbertVec]] = None
    grads: Optional[List[HilbertVec]] = None

    @property
    def iterations(self) -> int:
        return self.trace[-1].k if self.trace else 0

    @property
    def f_evals(self) -> int:
        return self.trace[-1].cum_f_evals if self.trace else 0

    @property
    def grad_evals(self) -> int:
        return self.trace[-1].cum_grad_evals if self.trace else 0

    @property
    def final_gmap_norm(self) -> float:
        return self.trace[-1].gmap_norm if self.trace else math.nan

    @property
    def wall_ms(self) -> float:
        return self.trace[-1].wall_ms if self.trace else 0.0

    def summary(self, timing: bool = True) -> dict:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "f_evals": self.f_evals,
            "grad_evals": self.grad_evals,
            "final_gmap_norm": self.final_gmap_norm,
            "wall_ms": self.wall_ms if timing else 0.0,
        }


def memory_len(k: int, m_max: int) -> int:
    """Window length ``m(k)``: ``m(0) = 0``, ``m(k) = min(m(k-1) + 1, m_max)``."""
    if k < 0 or m_max < 0:
        raise ValueError("k and m_max must be nonnegative")
    return min(k, m_max)


def nonmonotone_accept(window: Sequence[float], F_candidate: float, delta: float, alpha_k: float, gmap_norm_sq: float) -> bool:
    if len(window) == 0:
        raise ValueError("window must be nonempty")
    if not math.isfinite(F_candidate):
        return False
    return F_candidate <= max(window) - (delta / alpha_k) * gmap_norm_sq


def _trial_objective(obj: CompositeObjective, u: HilbertVec) -> float:
    phi = prox_value(obj.nonsmooth, u)
    if math.isinf(phi):
        return math.inf
    try:
        f = obj.smooth_eval(u)
    except NumericError as exc:
        log.debug("trial point rejected: %s", exc)
        return math.inf
    val = f + phi
    return val if math.isfinite(val) else math.inf


def backtrack(
    obj: CompositeObjective,
    u_k: HilbertVec,
    grad_k: HilbertVec,
    alpha_init: float,
    config: SolverConfig,
    window: Sequence[float],
    first_trial: Optional[ProxGradResult] = None,
) -> Tuple[float, int, ProxGradResult, Optional[float]]:
    """Find the smallest ``i`` with ``alpha_init * eta**i`` accepted.

    Returns ``(alpha_k, i_k, prox_grad_result, F_new)``. Each trial costs one
    objective evaluation and no gradient evaluation, so the caller accounts
    ``i_k + 1`` f-evals. With the linesearch disabled the first trial is taken
    unconditionally and ``F_new`` is ``None``.
    """
    pg = first_trial if first_trial is not None else prox_grad(obj, u_k, alpha_init, grad_k)
    if not config.linesearch_enabled:
        return alpha_init, 0, pg, None
    for i in range(config.max_backtracks + 1):
        alpha = alpha_init * config.eta**i
        if i > 0:
            pg = prox_grad(obj, u_k, alpha, grad_k)
        F_new = _trial_objective(obj, pg.t)
        if nonmonotone_accept(window, F_new, config.delta, alpha, inner(pg.g, pg.g)):
            return alpha, i, pg, F_new
    raise BacktrackExhausted(
        f"linesearch failed after {config.max_backtracks + 1} trials (alpha={alpha:.3e})",
        f_evals=config.max_backtracks + 1,
    )


def solve(obj: CompositeObjective, config: SolverConfig, u0: HilbertVec) -> SolverResult:
    """Run the nonmonotone splitting loop from ``u0``."""
    t0 = time.perf_counter()
    op = obj.nonsmooth
    u = u0.copy()
    if math.isinf(prox_value(op, u)):
        log.info("initial point outside the box; projecting once with alpha0")
        u = prox_apply(op, config.alpha0, u)

    window: deque = deque(maxlen=config.m_max + 1)
    trace: List[IterationRecord] = []
    iterates: Optional[List[HilbertVec]] = [] if config.store_iterates else None
    grads: Optional[List[HilbertVec]] = [] if config.store_iterates else None
    f_evals = 0
    grad_evals = 0
    hist: Optional[StepHistory] = None
    F_known: Optional[float] = None
    status = Status.MAX_ITER
    message = ""
    k = 0

    def record(F, gnorm, alpha, i_k):
        trace.append(
            IterationRecord(
                k=k, f_value=F, gmap_norm=gnorm, alpha_k=alpha, backtracks=i_k,
                cum_f_evals=f_evals, cum_grad_evals=grad_evals,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )

    try:
        while True:
            f_u, grad = obj.value_and_grad(u)
            grad_evals += 1
            if not grad.is_finite() or not math.isfinite(f_u):
                raise NumericError(f"non-finite f or gradient at iteration {k}")
            F = F_known if F_known is not None else f_u + prox_value(op, u)
            window.append(F)
            if iterates is not None:
                iterates.append(u.copy())
                grads.append(grad.copy())

            if hist is None or config.rule is StepRule.FIXED:
                alpha_init = clamp_initial(None, config.alpha0, config.alpha_lb, config.alpha_ub)
            else:
                cand = bb_candidate(
                    config.rule, hist, u, grad,
                    lambda: prox_grad(obj, u, hist.prev_alpha, grad, iteration=k).g,
                )
                alpha_init = clamp_initial(cand, hist.prev_alpha, config.alpha_lb, config.alpha_ub)

            first = prox_grad(obj, u, alpha_init, grad, iteration=k)
            gnorm0 = norm(first.g)
            if gnorm0 <= config.tol:
                record(F, gnorm0, alpha_init, 0)
                status = Status.CONVERGED
                break
            if k >= config.max_iter:
                record(F, gnorm0, alpha_init, 0)
                status = Status.MAX_ITER
                break

            try:
                alpha_k, i_k, pg, F_new = backtrack(obj, u, grad, alpha_init, config, window, first_trial=first)
            except BacktrackExhausted as exc:
                f_evals += exc.f_evals
                record(F, gnorm0, alpha_init, config.max_backtracks)
                status = Status.BACKTRACK_EXHAUSTED
                message = str(exc)
                break
            if config.linesearch_enabled:
                f_evals += i_k + 1
            record(F, norm(pg.g), alpha_k, i_k)
            hist = StepHistory(prev_u=u, prev_grad=grad, prev_gmap=pg.g, prev_alpha=alpha_k, iter_index=k + 1)
            u = pg.t
            F_known = F_new
            k += 1
    except NumericError as exc:
        status = Status.NUMERIC_ERROR
        message = str(exc)
        log.warning("solver stopped: %s", exc)

    return SolverResult(
        u_final=u, status=status, trace=trace, memory_window=list(window),
        message=message, iterates=iterates, grads=grads,
    )


def _f_values(trace_or_values) -> List[float]:
    out = []
    for item in trace_or_values:
        out.append(item.f_value if isinstance(item, IterationRecord) else float(item))
    return out


def ell_nu_indices(trace_or_values, m_max: int) -> Tuple[List[int], List[int]]:
    """Window-maximum indices ``ell(k)`` and the subsequence ``nu(k) = ell(k (m_max + 1))``.

    Ties in the window maximum go to the most recent iterate.
    """
    F = _f_values(trace_or_values)
    ell = []
    for k in range(len(F)):
        best = k
        for j in range(1, memory_len(k, m_max) + 1):
            if F[k - j] > F[best]:
                best = k - j
        ell.append(best)
    nu = [ell[k * (m_max + 1)] for k in range((len(F) - 1) // (m_max + 1) + 1)] if F else []
    return ell, nu


def format_float(x: float) -> str:
    """Shortest round-trip representation, locale independent."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_trace_csv(trace: Iterable[IterationRecord], path=None, timing: bool = True) -> str:
    """Serialize a trace; returns the CSV text and writes it when ``path`` is given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for rec in trace:
        w.writerow(rec.as_row(timing))
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_trace_csv(path) -> List[IterationRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise ValueError(f"unexpected trace header: {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise ValueError(f"line {lineno}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
            out.append(
                IterationRecord(
                    k=int(row[0]), f_value=float(row[1]), gmap_norm=float(row[2]), alpha_k=float(row[3]),
                    backtracks=int(row[4]), cum_f_evals=int(row[5]), cum_grad_evals=int(row[6]),
                    wall_ms=float(row[7]),
                )
            )
    return out
