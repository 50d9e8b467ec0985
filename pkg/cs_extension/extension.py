"""
Weighted extension div(x^alpha grad u) = 0 on (0, H) x periodic [0, 2*pi),
u = v at x = 0 and u = 0 at x = H, and its Dirichlet-to-Neumann map.

Finite differences on a graded tensor grid: the lateral second difference is
diagonalized by the FFT and every lateral mode is a tridiagonal solve in x.
"""
import logging
import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import fft
from scipy.linalg import solve_banded

from config import HarnessConfig
from fem.errors import DomainError, NumericError

from .fourier import FourierSeries, lateral_grid

logger = logging.getLogger(__name__)


class ExtensionProblem(BaseModel):
    """Extension data; alpha = 1 - 2s is checked, not trusted."""

    s: float = Field(..., gt=0.0, lt=1.0)
    alpha: Optional[float] = None
    boundary_data: FourierSeries
    strip_height: Optional[float] = Field(None, gt=0.0)
    n_x: int = Field(default_factory=lambda: HarnessConfig.CS_NX, ge=4)
    n_y: int = Field(default_factory=lambda: HarnessConfig.CS_NY, ge=4)

    @model_validator(mode="after")
    def _check(self) -> "ExtensionProblem":
        expected = 1.0 - 2.0 * self.s
        if self.alpha is None:
            self.alpha = expected
        elif self.alpha != expected:
            raise ValueError(f"alpha must equal 1 - 2s = {expected}, got {self.alpha}")
        if self.n_y % 2:
            raise ValueError("n_y must be even")
        if self.boundary_data.max_mode > self.n_y // 4:
            raise ValueError(f"boundary data has modes above n_y/4 = {self.n_y // 4}")
        if self.strip_height is None:
            active = [k for k in self.boundary_data.active_modes if k > 0]
            self.strip_height = 8.0 / (min(active) if active else 1)
        return self

    # ------------------------------------------------------------- grid
    @property
    def x(self) -> np.ndarray:
        j = np.arange(self.n_x + 1) / self.n_x
        return self.strip_height * j ** (2.0 / (1.0 + self.alpha))

    @property
    def y(self) -> np.ndarray:
        return lateral_grid(self.n_y)

    @property
    def dy(self) -> float:
        return 2.0 * math.pi / self.n_y

    def conductances(self) -> np.ndarray:
        """c_{j+1/2} = (1 - alpha) / (x_{j+1}^(1-alpha) - x_j^(1-alpha)), exact for the x^alpha flux."""
        p = self.x ** (1.0 - self.alpha)
        return (1.0 - self.alpha) / np.diff(p)

    def masses(self) -> np.ndarray:
        """Integral of x^alpha over each dual cell."""
        x = self.x
        mid = np.concatenate(([0.0], 0.5 * (x[1:] + x[:-1]), [x[-1]]))
        q = mid ** (1.0 + self.alpha) / (1.0 + self.alpha)
        return np.diff(q)

    def wavenumbers(self) -> np.ndarray:
        """Symbols of the lateral second difference for the rfft modes."""
        k = np.arange(self.n_y // 2 + 1)
        return (2.0 / self.dy) * np.sin(0.5 * k * self.dy)


class ExtensionField(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    problem: ExtensionProblem
    values: np.ndarray = Field(..., description="(n_x + 1, n_y) nodal values")
    modal: np.ndarray = Field(..., description="(n_x + 1, n_y/2 + 1) rfft coefficients per layer")

    def at(self, j: int) -> np.ndarray:
        return self.values[j]


def _solve_modes(problem: ExtensionProblem, boundary_hat: np.ndarray) -> np.ndarray:
    c = problem.conductances()
    m = problem.masses()
    keff2 = problem.wavenumbers() ** 2
    nx = problem.n_x
    interior = nx - 1
    modal = np.zeros((nx + 1, len(keff2)), dtype=complex)
    modal[0] = boundary_hat
    for k, kk in enumerate(keff2):
        if boundary_hat[k] == 0.0:
            continue
        ab = np.zeros((3, interior))
        ab[0, 1:] = -c[1:interior]
        ab[1, :] = c[:interior] + c[1:interior + 1] + m[1:nx] * kk
        ab[2, :-1] = -c[1:interior]
        rhs = np.zeros(interior, dtype=complex)
        rhs[0] = c[0] * boundary_hat[k]
        sol = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericError(f"tridiagonal solve failed for lateral mode {k}")
        modal[1:nx, k] = sol
    return modal


def extend(problem: ExtensionProblem) -> ExtensionField:
    """Discrete weighted extension of the boundary data."""
    v = problem.boundary_data.evaluate(problem.y)
    modal = _solve_modes(problem, fft.rfft(v))
    values = fft.irfft(modal, n=problem.n_y, axis=1)
    return ExtensionField(problem=problem, values=values, modal=modal)


def dtn_apply(problem: ExtensionProblem, field: Optional[ExtensionField] = None) -> np.ndarray:
    """
    -x^alpha u_x at x = 0+ on the lateral grid.

    The flux through the first layer uses the exact x^(1-alpha) conductance;
    the lateral term of the first dual cell makes the map the Schur complement
    of the discrete energy.
    """
    field = field or extend(problem)
    c = problem.conductances()
    m = problem.masses()
    keff2 = problem.wavenumbers() ** 2
    f_hat = c[0] * (field.modal[0] - field.modal[1]) + m[0] * keff2 * field.modal[0]
    f = fft.irfft(f_hat, n=problem.n_y)
    if not np.all(np.isfinite(f)):
        raise NumericError("Neumann trace extrapolation produced non-finite values")
    return f


def lateral_inner(f: np.ndarray, g: np.ndarray, n_y: int) -> float:
    """Periodic trapezoid inner product on the lateral grid."""
    return float(np.sum(f * g) * 2.0 * math.pi / n_y)


def extension_energy(field: ExtensionField) -> float:
    """Discrete weighted Dirichlet energy of the extension (integral of x^alpha |grad u|^2)."""
    problem = field.problem
    c = problem.conductances()
    m = problem.masses()
    u = field.values
    dx_part = np.sum(c[:, None] * np.diff(u, axis=0) ** 2)
    dy_part = np.sum(m[:, None] * ((np.roll(u, -1, axis=1) - u) / problem.dy) ** 2)
    return float((dx_part + dy_part) * problem.dy)


def with_data(problem: ExtensionProblem, data: FourierSeries) -> ExtensionProblem:
    """Same s, strip and grid with new boundary data, validated again."""
    return ExtensionProblem(**{**problem.model_dump(exclude={"boundary_data"}), "boundary_data": data})
