"""Nonmonotone forward-backward splitting with Barzilai-Borwein step sizes."""

from .composite import CompositeObjective, ProxGradResult, model_value, objective_value, prox_grad
from .errors import NewtonDivergedError, NumericError
from .hilbert import HilbertVec, InnerProductSpace, axpy, inner, norm
from .prox import ProxOperator, ProxVariant, prox_apply, prox_oracle_1d, prox_value
from .solver import IterationRecord, SolverConfig, SolverResult, Status, solve
from .stepsize import StepHistory, StepRule, bb_candidate, clamp_initial
from .synthetic import QuadraticL1Problem

__version__ = "0.1.0"

__all__ = [
    "CompositeObjective",
    "ProxGradResult",
    "model_value",
    "objective_value",
    "prox_grad",
    "NumericError",
    "NewtonDivergedError",
    "HilbertVec",
    "InnerProductSpace",
    "axpy",
    "inner",
    "norm",
    "ProxOperator",
    "ProxVariant",
    "prox_apply",
    "prox_oracle_1d",
    "prox_value",
    "IterationRecord",
    "SolverConfig",
    "SolverResult",
    "Status",
    "solve",
    "StepHistory",
    "StepRule",
    "bb_candidate",
    "clamp_initial",
    "QuadraticL1Problem",
]
