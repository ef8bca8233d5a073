"""Numerical toolkit for channel preservability in quantum resource theories."""
from .errors import PreservaError, SolverError
from .linalg import TOL, Tolerances

__version__ = "0.1.0"
__all__ = ["PreservaError", "SolverError", "TOL", "Tolerances"]
