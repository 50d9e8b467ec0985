"""
Reference domains (unit disk family, unit square) and the boundary partition rule.

The distance function is always the exact analytic one, never the distance to
the polygonal boundary of a mesh.
"""
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator

from .errors import DomainError

DIRICHLET = 0
FLUX = 1
LABEL_NAMES = {DIRICHLET: "Dirichlet", FLUX: "Flux"}
LABEL_CODES = {name: code for code, name in LABEL_NAMES.items()}


class Domain(BaseModel):
    """Reference domain descriptor."""

    kind: Literal["disk", "square"] = Field("disk", description="Reference domain")
    radius: float = Field(1.0, gt=0, description="Disk radius (ignored for the square)")

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2 if self.kind == "disk" else 1.0

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius if self.kind == "disk" else 4.0

    @property
    def center(self) -> np.ndarray:
        return np.zeros(2) if self.kind == "disk" else np.array([0.5, 0.5])

    def signed_distance(self, points) -> np.ndarray:
        """Distance to the boundary, negative outside the domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            return self.radius - np.hypot(pts[:, 0], pts[:, 1])
        x, y = pts[:, 0], pts[:, 1]
        return np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))

    def distance(self, points) -> np.ndarray:
        """Exact distance to the boundary for points in the closed domain."""
        d = self.signed_distance(points)
        tol = 1e-12 * max(self.radius, 1.0)
        if np.any(d < -tol):
            raise DomainError(f"{int(np.sum(d < -tol))} point(s) lie outside the {self.kind}")
        return np.maximum(d, 0.0)

    def project(self, points) -> np.ndarray:
        """Closest point on the boundary curve (used for refinement of boundary edges)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        if self.kind == "disk":
            r = np.hypot(pts[:, 0], pts[:, 1])
            return pts * (self.radius / r)[:, None]
        return pts

    def boundary_param(self, points) -> np.ndarray:
        """Arc-length parameter in [0, perimeter) of points on the boundary."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "disk":
            phi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
            return self.radius * phi
        x, y = pts[:, 0], pts[:, 1]
        s = np.empty(len(pts))
        tol = 1e-12
        bottom = np.abs(y) <= tol
        right = (np.abs(x - 1.0) <= tol) & ~bottom
        top = (np.abs(y - 1.0) <= tol) & ~bottom & ~right
        left = ~(bottom | right | top)
        s[bottom] = x[bottom]
        s[right] = 1.0 + y[right]
        s[top] = 2.0 + (1.0 - x[top])
        s[left] = np.mod(3.0 + (1.0 - y[left]), 4.0)
        return s

    def boundary_point(self, s) -> np.ndarray:
        """Point on the boundary curve at arc-length parameter s."""
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self.perimeter)
        if self.kind == "disk":
            phi = s / self.radius
            return self.radius * np.column_stack((np.cos(phi), np.sin(phi)))
        out = np.empty((len(s), 2))
        side = np.minimum(np.floor(s).astype(int), 3)
        f = s - side
        out[side == 0] = np.column_stack((f[side == 0], np.zeros(np.sum(side == 0))))
        out[side == 1] = np.column_stack((np.ones(np.sum(side == 1)), f[side == 1]))
        out[side == 2] = np.column_stack((1.0 - f[side == 2], np.ones(np.sum(side == 2))))
        out[side == 3] = np.column_stack((np.zeros(np.sum(side == 3)), 1.0 - f[side == 3]))
        return out

    def polar_angle(self, points) -> np.ndarray:
        """Angle in [0, 2*pi) of points about the domain center."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        return np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)


class BoundaryPartitionRule(BaseModel):
    """
    Assigns every boundary edge to Gamma_1 (Dirichlet) or Gamma_2 (Flux).

    angular-split: Gamma_2 is the arc of edges whose midpoint polar angle about
    the domain center lies in [0, theta0).
    axis-split: Gamma_2 is the set of edges whose midpoint has y > offset.
    """

    kind: Literal["full-dirichlet", "angular-split", "axis-split"] = "full-dirichlet"
    theta0: float = Field(math.pi, gt=0, lt=2 * math.pi)
    offset: float = 0.0

    @field_validator("offset")
    @classmethod
    def _finite_offset(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("offset must be finite")
        return v

    def label(self, domain: Domain, midpoints: np.ndarray) -> np.ndarray:
        """Label array (DIRICHLET / FLUX) for boundary edge midpoints."""
        mids = np.atleast_2d(np.asarray(midpoints, dtype=float))
        labels = np.full(len(mids), DIRICHLET, dtype=np.int64)
        if self.kind == "angular-split":
            labels[domain.polar_angle(mids) < self.theta0] = FLUX
        elif self.kind == "axis-split":
            labels[mids[:, 1] > self.offset] = FLUX
        return labels
