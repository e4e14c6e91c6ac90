"""JSON run configuration: schema, validation and problem construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from .composite import CompositeObjective
from .hilbert import HilbertVec
from .pde import EllipticProblem, Grid2D, ParabolicProblem
from .prox import ProxOperator
from .solver import SolverConfig
from .stepsize import StepRule
from .synthetic import QuadraticL1Problem

__all__ = [
    "ConfigError",
    "RunConfig",
    "BuiltProblem",
    "load_config",
    "parse_config",
    "build_problem",
    "load_grid_file",
]


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit code 1)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EllipticSpec(_Strict):
    kind: Literal["elliptic"]
    n: int = Field(32, ge=2)
    kappa: float = Field(1e-2, gt=0)
    sigma: float = Field(1e-4, ge=0)
    lam: float = Field(1e-3, ge=0)
    ua: float = -3.0
    ub: float = 2.0
    y_d_path: Optional[str] = None
    newton_tol: float = Field(1e-12, gt=0)
    newton_max_iter: int = Field(50, ge=1)


class ParabolicSpec(_Strict):
    kind: Literal["parabolic"]
    n: int = Field(16, ge=2)
    T: float = Field(1.0, gt=0)
    nt: int = Field(20, ge=2)
    kappa: float = Field(1e-2, gt=0)
    lam: float = Field(1e-2, ge=0)
    ua: float = -100.0
    ub: float = 100.0
    y_d_path: Optional[str] = None


class QuadraticSpec(_Strict):
    kind: Literal["quadratic_l1"]
    dim: int = Field(50, ge=1)
    hess_diag: Optional[List[float]] = None
    center: Optional[List[float]] = None
    d_min: float = Field(1.0, gt=0)
    d_max: float = Field(4.0, gt=0)
    sigma: float = Field(0.0, ge=0)
    lam: float = Field(0.1, ge=0)
    ua: float = -3.0
    ub: float = 2.0
    random_weights: bool = False

    @model_validator(mode="after")
    def _explicit_data(self):
        if (self.hess_diag is None) != (self.center is None):
            raise ValueError("hess_diag and center must be given together")
        if self.hess_diag is not None and len(self.hess_diag) != len(self.center):
            raise ValueError("hess_diag and center must have equal length")
        return self


class SolverSpec(_Strict):
    rule: Literal["fixed", "bb1a", "bb2a", "abba", "bb1b", "bb2b", "abbb"] = "abbb"
    delta: float = 0.9
    m_max: int = 8
    eta: float = 8.0
    alpha_lb: float = 1e-4
    alpha_ub: float = 1e2
    alpha0: float = 10.0
    tol: float = 1e-6
    max_iter: int = 10000
    max_backtracks: int = 60
    linesearch: bool = True
    fixed_with_linesearch: bool = False

    @model_validator(mode="after")
    def _check(self):
        self.to_solver_config()
        return self

    def to_solver_config(self, store_iterates: bool = False) -> SolverConfig:
        # the fixed baseline runs without linesearch unless explicitly requested
        ls = self.linesearch and (self.rule != "fixed" or self.fixed_with_linesearch)
        return SolverConfig(
            delta=self.delta, m_max=self.m_max, eta=self.eta, alpha_lb=self.alpha_lb,
            alpha_ub=self.alpha_ub, alpha0=self.alpha0, tol=self.tol, max_iter=self.max_iter,
            rule=StepRule.parse(self.rule), linesearch_enabled=ls,
            max_backtracks=self.max_backtracks, store_iterates=store_iterates,
        )


class OutputSpec(_Strict):
    trace_path: str = "trace.csv"
    snapshots: bool = False
    timing: bool = True


class RunConfig(_Strict):
    problem: Annotated[Union[EllipticSpec, ParabolicSpec, QuadraticSpec], Field(discriminator="kind")]
    solver: SolverSpec = SolverSpec()
    output: OutputSpec = OutputSpec()
    seed: int = 0
    _base_dir: Optional[Path] = PrivateAttr(None)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, str(path))
    cfg._base_dir = Path(path).resolve().parent
    return cfg


def load_grid_file(path, expected: int) -> np.ndarray:
    """Read ``expected`` row-major values from CSV/text or raw little-endian float64."""
    p = Path(path)
    try:
        if p.suffix.lower() in (".csv", ".txt"):
            vals = np.loadtxt(p, delimiter=",", ndmin=1, dtype=float).ravel()
        else:
            vals = np.fromfile(p, dtype="<f8")
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read grid file {path}: {exc}") from exc
    if vals.size != expected:
        raise ConfigError(f"grid file {path} has {vals.size} values, expected {expected}")
    return vals


@dataclass
class BuiltProblem:
    """Everything a run needs: the objective, a start point and what is known in closed form."""

    kind: str
    problem: object
    objective: CompositeObjective
    u0: HilbertVec
    prox: ProxOperator
    L: Optional[float] = None
    F_star: Optional[float] = None
    u_star: Optional[HilbertVec] = None


def _resolve(cfg: RunConfig, path: str) -> Path:
    p = Path(path)
    base = cfg._base_dir
    return p if p.is_absolute() or base is None else base / p


def build_problem(cfg: RunConfig, adjoint_sign: float = 1.0) -> BuiltProblem:
    """Instantiate the configured problem with a fresh objective (own caches)."""
    spec = cfg.problem
    try:
        if spec.kind == "elliptic":
            grid = Grid2D(spec.n)
            y_d = None if spec.y_d_path is None else load_grid_file(_resolve(cfg, spec.y_d_path), grid.dim)
            prob = EllipticProblem(
                grid, kappa=spec.kappa, sigma=spec.sigma, lam=spec.lam, ua=spec.ua, ub=spec.ub, y_d=y_d,
                newton_tol=spec.newton_tol, newton_max_iter=spec.newton_max_iter, adjoint_sign=adjoint_sign,
            )
            return BuiltProblem("elliptic", prob, prob.objective(), prob.space.zero(), prob.prox_op)
        if spec.kind == "parabolic":
            grid = Grid2D(spec.n)
            y_d = None if spec.y_d_path is None else load_grid_file(_resolve(cfg, spec.y_d_path), grid.dim * spec.nt)
            prob = ParabolicProblem(
                grid, T=spec.T, nt=spec.nt, kappa=spec.kappa, lam=spec.lam, ua=spec.ua, ub=spec.ub,
                y_d=y_d, adjoint_sign=adjoint_sign,
            )
            return BuiltProblem("parabolic", prob, prob.objective(), prob.zero_control(), prob.prox_op)
        if spec.hess_diag is not None:
            prob = QuadraticL1Problem(
                np.array(spec.hess_diag), np.array(spec.center), sigma=spec.sigma, lam=spec.lam, ua=spec.ua, ub=spec.ub
            )
        else:
            prob = QuadraticL1Problem.random(
                spec.dim, seed=cfg.seed, d_min=spec.d_min, d_max=spec.d_max, lam=spec.lam, sigma=spec.sigma,
                ua=spec.ua, ub=spec.ub, random_weights=spec.random_weights,
            )
        L = prob.lipschitz
        return BuiltProblem(
            "quadratic_l1", prob, prob.objective(), prob.space.zero(), prob.prox_op,
            L=L if L > 0 else None, F_star=prob.optimal_value(), u_star=prob.minimizer(),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid problem parameters: {exc}") from exc


def finite_or_none(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None
