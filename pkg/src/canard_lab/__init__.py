"""Canard limit cycles at a folded saddle-node of type II.

Numerical toolkit for the family of small canard cycles born in a
singular Hopf bifurcation of a three-dimensional slow-fast system:
blowup charts, analytic slow-manifold power series, a Melnikov
construction for the small cycles, a Shilnikov-type transition solver,
and assembly plus continuation of the connection branch of full canard
cycles, with validation against singular limits.
"""

from .backend import BACKEND, available_backends
from .numerics import (
    CanardLabError,
    ConvergenceError,
    SectionSpec,
    SolverError,
    SystemValidationError,
    Tolerances,
)
from .system_model import MonomialTable, SlowFastSystem

__all__ = [
    "BACKEND",
    "available_backends",
    "CanardLabError",
    "ConvergenceError",
    "SectionSpec",
    "SolverError",
    "SystemValidationError",
    "Tolerances",
    "MonomialTable",
    "SlowFastSystem",
]

__version__ = "0.1.0"
