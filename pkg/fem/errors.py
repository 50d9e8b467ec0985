"""
Exception hierarchy for the FEM harness.
"""
from typing import List, Optional


class HarnessError(Exception):
    """Base class for every harness failure."""


class DomainError(HarnessError, ValueError):
    """A point or parameter lies outside its admissible set."""


class MeshValidationError(DomainError):
    """A mesh (or mesh document) violates the Mesh invariants."""


class MeshResourceError(HarnessError):
    """Requested mesh exceeds the configured vertex budget."""


class ConfigError(HarnessError):
    """Experiment configuration does not match the schema."""


class NumericError(HarnessError):
    """Quadrature, linear-solve or extrapolation failure."""


class ConvergenceError(NumericError):
    """Newton iteration did not reach the residual tolerance."""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None,
                 n: Optional[int] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
        self.n = n
