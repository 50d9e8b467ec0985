"""
Problem and solution value types.
"""
import json
import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .domain import BoundaryPartitionRule
from .errors import DomainError
from .measure import BumpProfile, MeasureData, MollifiedMeasure
from .mesh import Mesh


class ProblemSpec(BaseModel):
    """Data of the regularized problem: exponents, mesh, measures and partition."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    gamma: float = Field(..., gt=1.0, description="Boundary nonlinearity exponent")
    alpha: float = Field(0.0, gt=-1.0, lt=1.0, description="Weight exponent")
    mesh: Mesh
    mu1: MeasureData = Field(default_factory=lambda: MeasureData(support="interior"))
    mu2: MeasureData = Field(default_factory=lambda: MeasureData(support="gamma2"))
    partition: BoundaryPartitionRule = Field(default_factory=BoundaryPartitionRule)
    profile: BumpProfile = Field(default_factory=BumpProfile)
    r0: Optional[float] = Field(None, gt=0, description="Override of the initial bump radius")
    threads: int = Field(1, ge=1)

    @field_validator("gamma", "alpha")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("exponents must be finite")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "ProblemSpec":
        if self.mu1.support != "interior":
            raise ValueError("mu1 must be an interior measure")
        if self.mu2.support != "gamma2":
            raise ValueError("mu2 must be supported on Gamma_2")
        if not self.mesh.has_flux_boundary and not self.mu2.is_zero:
            raise ValueError("mu2 is nonzero but Gamma_2 is empty")
        self.mu1.check_support(self.mesh)
        self.mu2.check_support(self.mesh)
        return self

    def with_mesh(self, mesh: Mesh) -> "ProblemSpec":
        return self.model_copy(update={"mesh": mesh})


class SolverTelemetry(BaseModel):
    newton_iterations: int = 0
    residual_history: List[float] = Field(default_factory=list)
    final_residual: float = 0.0
    tolerance: float = 0.0
    linear_iterations: List[int] = Field(default_factory=list)
    armijo_halvings: int = 0
    linear_fallbacks: int = 0
    warm_started: bool = False


def mesh_ref(mesh: Mesh) -> str:
    return f"{mesh.domain.kind}:V{mesh.num_vertices}:T{mesh.num_triangles}:h{mesh.h_max:.6e}"


class DiscreteSolution(BaseModel):
    """Nodal P1 coefficients (pinned to 0 on Gamma_1) with the data that produced them."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coefficients: np.ndarray
    n: int
    alpha: float
    gamma: float
    mesh: Mesh = Field(..., exclude=True)
    telemetry: SolverTelemetry = Field(default_factory=SolverTelemetry)
    mu1n: Optional[MollifiedMeasure] = Field(None, exclude=True)
    mu2n: Optional[MollifiedMeasure] = Field(None, exclude=True)

    @model_validator(mode="after")
    def _pinned(self) -> "DiscreteSolution":
        if self.coefficients.shape != (self.mesh.num_vertices,):
            raise DomainError("one coefficient per mesh vertex is required")
        if np.any(self.coefficients[self.mesh.dirichlet_vertex_mask] != 0.0):
            raise DomainError("coefficients on Gamma_1 vertices must be exactly 0")
        return self

    @classmethod
    def from_values(cls, mesh: Mesh, values: np.ndarray, alpha: float = 0.0,
                    gamma: float = 2.0, n: int = 0) -> "DiscreteSolution":
        """Wrap nodal values (zeroed on Gamma_1) as a solution, e.g. an interpolated field."""
        coeffs = np.array(values, dtype=float).reshape(mesh.num_vertices)
        coeffs[mesh.dirichlet_vertex_mask] = 0.0
        return cls(coefficients=coeffs, n=n, alpha=alpha, gamma=gamma, mesh=mesh)


    def to_dict(self) -> Dict[str, Any]:
        return {
            "mesh_ref": mesh_ref(self.mesh),
            "coefficients": self.coefficients.tolist(),
            "n": self.n,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "telemetry": self.telemetry.model_dump(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class P1Field(BaseModel):
    """Arbitrary nodal P1 field on a mesh (no boundary pinning), e.g. an interpolant."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mesh: Mesh
    coefficients: np.ndarray

    @classmethod
    def interpolate(cls, mesh: Mesh, field) -> "P1Field":
        return cls(mesh=mesh, coefficients=mesh.interpolate(field))

    def scaled(self, c: float) -> "P1Field":
        return P1Field(mesh=self.mesh, coefficients=c * self.coefficients)
