"""Realizability-preserving spectral two-moment radiation transport."""

from .errors import (
    ConfigError,
    InvalidVelocityError,
    NonConvergenceError,
    RealizabilityError,
)
from .solvers import SolverConfig, SolveReport

__all__ = [
    "ConfigError",
    "InvalidVelocityError",
    "NonConvergenceError",
    "RealizabilityError",
    "SolverConfig",
    "SolveReport",
]

__version__ = "0.1.0"
