"""Desk-scale PDE-constrained control problems."""

from .elliptic import EllipticProblem, default_elliptic_target
from .grid import Grid2D, SPDSolver
from .gradcheck import DirectionCheck, directional_fd_check
from .parabolic import ParabolicProblem, default_parabolic_target

__all__ = [
    "Grid2D",
    "SPDSolver",
    "EllipticProblem",
    "ParabolicProblem",
    "default_elliptic_target",
    "default_parabolic_target",
    "DirectionCheck",
    "directional_fd_check",
]
