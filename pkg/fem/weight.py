"""
The degenerate weight d(x, boundary)**alpha: pointwise values, boundary-graded
element quadrature and a sampled Muckenhoupt A2 diagnostic.
"""
import logging
import math
from typing import NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from config import HarnessConfig
from .domain import Domain
from .errors import DomainError, NumericError
from .mesh import Mesh
from .quadrature import (collapsed_reference, gauss_legendre, graded_rule, tensor_triangle_rule,
                         triangle_rule, two_sided_graded_rule)

logger = logging.getLogger(__name__)

# Triangle classes for the quadrature dispatch
INTERIOR, NEAR, VERTEX, EDGE = 0, 1, 2, 3


class WeightSpec(BaseModel):
    """alpha in (-1, 1) together with the domain whose boundary distance is used."""

    alpha: float = Field(0.0, gt=-1.0, lt=1.0, description="Weight exponent")
    domain: Domain = Field(default_factory=Domain)

    @field_validator("alpha")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("alpha must be finite")
        return v


def weight_value(spec: WeightSpec, point) -> float:
    """d(x, boundary)**alpha at a strictly interior point."""
    d = spec.domain.distance(np.asarray(point, dtype=float).reshape(1, 2))[0]
    if d <= 0.0:
        raise DomainError(f"weight is not evaluated on the boundary (point {tuple(point)})")
    if spec.alpha == 0.0:
        return 1.0
    return float(d ** spec.alpha)


def weight_at(spec: WeightSpec, points: np.ndarray) -> np.ndarray:
    """Vectorized weight over quadrature points (which never sit on the boundary)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if spec.alpha == 0.0:
        return np.ones(len(pts))
    d = spec.domain.distance(pts)
    if np.any(d <= 0.0):
        raise NumericError("quadrature point on the boundary")
    return d ** spec.alpha


# --------------------------------------------------------------------- rules
def _reference_rule(kind: int, alpha: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    if kind == INTERIOR:
        return triangle_rule(order)
    if kind == NEAR:
        return tensor_triangle_rule(HarnessConfig.GRADED_POINTS)
    t, w = graded_rule(alpha)
    if kind == EDGE:
        # grade 1 - lam toward the boundary edge opposite the apex
        return collapsed_reference((1.0 - t, w), two_sided_graded_rule())
    return collapsed_reference((t, w), gauss_legendre(HarnessConfig.GRADED_POINTS))


def _classify(domain: Domain, corners: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature class and role permutation (apex, a, b) for each triangle.

    corners : (T, 3, 2) vertex coordinates.
    """
    T = corners.shape[0]
    kind = np.full(T, INTERIOR, dtype=np.int64)
    perm = np.tile(np.arange(3), (T, 1))
    if alpha == 0.0:
        return kind, perm
    d = domain.distance(corners.reshape(-1, 2)).reshape(T, 3)
    diam = np.max(np.linalg.norm(corners - np.roll(corners, 1, axis=1), axis=2), axis=1)
    on_boundary = d <= 1e-12 * max(domain.radius, 1.0)
    count = on_boundary.sum(axis=1)

    near = d.min(axis=1) < HarnessConfig.NEAR_BOUNDARY_FACTOR * diam
    kind[near] = NEAR

    vertex = count == 1
    kind[vertex] = VERTEX
    apex = np.argmin(d, axis=1)
    perm[vertex] = (apex[vertex, None] + np.arange(3)) % 3

    edge = count >= 2
    kind[edge] = EDGE
    apex = np.argmax(d, axis=1)
    perm[edge] = (apex[edge, None] + np.arange(3)) % 3
    return kind, perm


class MeshQuadrature(NamedTuple):
    """Flattened quadrature over a whole mesh for one alpha."""

    points: np.ndarray        # (P, 2)
    triangle: np.ndarray      # (P,) owning triangle
    bary: np.ndarray          # (P, 3) barycentric coordinates in local vertex order
    dx: np.ndarray            # (P,) plain area weights
    weighted: np.ndarray      # (P,) dx * d**alpha
    element_weight: np.ndarray  # (T,) integral of d**alpha over each triangle

    def integrate(self, values: np.ndarray, weighted: bool = True) -> float:
        return float(np.sum((self.weighted if weighted else self.dx) * values))

    def evaluate(self, coefficients: np.ndarray, triangles: np.ndarray) -> np.ndarray:
        """P1 field with the given nodal values at every quadrature point."""
        return np.sum(np.asarray(coefficients)[triangles[self.triangle]] * self.bary, axis=1)


def _batch_rule(spec: WeightSpec, corners: np.ndarray, order: int):
    T = corners.shape[0]
    kind, perm = _classify(spec.domain, corners, spec.alpha)
    area2 = np.abs((corners[:, 1, 0] - corners[:, 0, 0]) * (corners[:, 2, 1] - corners[:, 0, 1])
                   - (corners[:, 2, 0] - corners[:, 0, 0]) * (corners[:, 1, 1] - corners[:, 0, 1]))
    if np.any(area2 <= 0.0):
        bad = int(np.flatnonzero(area2 <= 0.0)[0])
        raise NumericError(f"degenerate triangle {bad} cannot be integrated")
    chunks = []
    for k in (INTERIOR, NEAR, VERTEX, EDGE):
        ids = np.flatnonzero(kind == k)
        if len(ids) == 0:
            continue
        ref_bary, ref_w = _reference_rule(k, spec.alpha, order)
        Q = len(ref_w)
        bary = np.zeros((len(ids), Q, 3))
        rows = np.arange(len(ids))[:, None, None]
        cols = np.arange(Q)[None, :, None]
        bary[rows, cols, perm[ids][:, None, :]] = ref_bary[None, :, :]
        pts = np.einsum("tqj,tjd->tqd", bary, corners[ids])
        dx = area2[ids, None] * ref_w[None, :]
        chunks.append((np.repeat(ids, Q), bary.reshape(-1, 3), pts.reshape(-1, 2), dx.ravel()))
    tri = np.concatenate([c[0] for c in chunks])
    order_idx = np.argsort(tri, kind="stable")
    tri = tri[order_idx]
    bary = np.concatenate([c[1] for c in chunks])[order_idx]
    pts = np.concatenate([c[2] for c in chunks])[order_idx]
    dx = np.concatenate([c[3] for c in chunks])[order_idx]
    weighted = dx * weight_at(spec, pts)
    element_weight = np.bincount(tri, weights=weighted, minlength=T)
    return pts, tri, bary, dx, weighted, element_weight


def element_quadrature(spec: WeightSpec, triangle, order: int = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature points and weights (already multiplied by d**alpha) on one triangle.

    Triangles touching the boundary get the geometrically graded collapsed
    rule; alpha = 0 always uses the symmetric rule of degree `order`.
    """
    order = HarnessConfig.TRIANGLE_DEGREE if order is None else order
    if order < 1:
        raise NumericError(f"quadrature order must be >= 1, got {order}")
    corners = np.asarray(triangle, dtype=float).reshape(1, 3, 2)
    pts, _, _, _, weighted, _ = _batch_rule(spec, corners, order)
    return pts, weighted


def mesh_quadrature(mesh: Mesh, alpha: float, order: Optional[int] = None) -> MeshQuadrature:
    """Cached quadrature over every triangle of the mesh."""
    order = HarnessConfig.TRIANGLE_DEGREE if order is None else order
    spec = WeightSpec(alpha=alpha, domain=mesh.domain)

    def build():
        rule = MeshQuadrature(*_batch_rule(spec, mesh.vertices[mesh.triangles], order))
        for array in rule:
            array.setflags(write=False)
        logger.debug(f"Built quadrature for alpha={alpha}: {len(rule.dx)} points")
        return rule

    return mesh.cached(("quadrature", float(alpha), order), build)


# -------------------------------------------------------------- radial checks
def annulus_weight_integral(alpha: float, eps: float, radius: float = 1.0) -> float:
    """Graded-rule value of the integral of d**alpha over radius - eps < |x| < radius."""
    t, w = graded_rule(alpha)
    s = eps * t
    return float(2.0 * math.pi * eps * np.sum(w * s ** alpha * (radius - s)))


def annulus_weight_exact(alpha: float, eps: float, radius: float = 1.0) -> float:
    return 2.0 * math.pi * (radius * eps ** (alpha + 1) / (alpha + 1) - eps ** (alpha + 2) / (alpha + 2))


def radial_a2_product(alpha: float, numeric: bool = True) -> float:
    """
    {avg over [0,R] of (R-r)**alpha} * {avg of (R-r)**-alpha}, which equals 1/(1-alpha**2).
    """
    if not -1.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (-1, 1), got {alpha}")
    if not numeric:
        return 1.0 / (1.0 - alpha ** 2)
    t, w = graded_rule(alpha)
    tm, wm = graded_rule(-alpha)
    return float(np.sum(w * t ** alpha) * np.sum(wm * tm ** (-alpha)))


# ------------------------------------------------------------------------ A2
class Ball(BaseModel):
    cx: float
    cy: float
    r: float = Field(..., gt=0)


class A2Report(BaseModel):
    """Sampled lower bound for the A2 constant of d**alpha over balls inside the domain."""

    alpha: float
    constant_estimate: float = Field(..., description="max over sampled balls of avg(w)*avg(1/w)")
    ball_count: int = Field(..., ge=1)
    worst_ball: Ball
    interior_balls_only: bool = True


def _ball_rule(n_radial: int, n_angular: int) -> Tuple[np.ndarray, np.ndarray]:
    rho, wr = gauss_legendre(n_radial)
    phi = 2.0 * math.pi * (np.arange(n_angular) + 0.5) / n_angular
    R, P = np.meshgrid(rho, phi, indexing="ij")
    offsets = np.column_stack(((R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()))
    weights = (np.outer(wr * rho, np.full(n_angular, 2.0 * math.pi / n_angular))).ravel()
    return offsets, weights


def a2_constant_estimate(spec: WeightSpec, n_balls: int, seed: int) -> A2Report:
    """
    Max of {avg_B w}{avg_B 1/w} over n_balls seeded balls B inside the domain.

    Balls are drawn one after another from the seeded stream, so the sample for
    n_balls is a prefix of the sample for any larger count.
    """
    if n_balls < 1:
        raise DomainError(f"n_balls must be >= 1, got {n_balls}")
    domain = spec.domain
    rng = np.random.default_rng(seed)
    offsets, qw = _ball_rule(2 * HarnessConfig.BUMP_RADIAL_POINTS, 2 * HarnessConfig.BUMP_ANGULAR_POINTS)
    total = np.sum(qw)
    best, worst = -math.inf, None
    for _ in range(n_balls):
        u = rng.random(3)
        if domain.kind == "disk":
            rr = domain.radius * math.sqrt(u[0])
            center = np.array([rr * math.cos(2 * math.pi * u[1]), rr * math.sin(2 * math.pi * u[1])])
        else:
            center = domain.center + (u[:2] - 0.5)
        d = float(domain.distance(center.reshape(1, 2))[0])
        if d <= 0.0:
            continue
        r = d * (1.0 - 0.9 * u[2])
        w = weight_at(spec, center + r * offsets) if spec.alpha != 0.0 else np.ones(len(qw))
        product = (np.sum(qw * w) / total) * (np.sum(qw / w) / total)
        if product > best:
            best, worst = product, Ball(cx=float(center[0]), cy=float(center[1]), r=r)
    if worst is None:
        raise NumericError("no admissible ball was sampled")
    logger.info(f"A2 estimate alpha={spec.alpha}: {best:.6f} over {n_balls} balls")
    return A2Report(alpha=spec.alpha, constant_estimate=float(best), ball_count=n_balls, worst_ball=worst)
