"""
Radon measure data (atoms plus a catalogued density) and their mollified
weak-* approximations.

A mollified measure is stored as a weighted point cloud: each atom becomes a
normalized bump sampled by a fixed quadrature, densities are sampled by a
domain quadrature. Pairing with any field is then a weighted sum.
"""
import logging
import math
import re
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import HarnessConfig
from .domain import Domain
from .errors import DomainError
from .mesh import Mesh
from .quadrature import gauss_legendre

logger = logging.getLogger(__name__)

Field2D = Callable[[np.ndarray], np.ndarray]

_DENSITY_PATTERNS = {
    "one": re.compile(r"^one$"),
    "gauss": re.compile(r"^gauss\(\s*([-+\d.eE]+)\s*,\s*([-+\d.eE]+)\s*,\s*([-+\d.eE]+)\s*\)$"),
    "cos_k": re.compile(r"^cos_k\(\s*([-+\d.eE]+)\s*\)$"),
}


def density_function(identifier: str, domain: Domain) -> Field2D:
    """Resolve a catalogued density id ("one", "gauss(cx,cy,s)", "cos_k(k)") to a callable."""
    ident = identifier.strip()
    if _DENSITY_PATTERNS["one"].match(ident):
        return lambda p: np.ones(len(np.atleast_2d(p)))
    m = _DENSITY_PATTERNS["gauss"].match(ident)
    if m:
        cx, cy, s = (float(g) for g in m.groups())
        if s <= 0:
            raise DomainError(f"gauss density width must be positive, got {s}")
        center = np.array([cx, cy])
        return lambda p: np.exp(-np.sum((np.atleast_2d(p) - center) ** 2, axis=1) / (2.0 * s * s))
    m = _DENSITY_PATTERNS["cos_k"].match(ident)
    if m:
        k = float(m.group(1))
        return lambda p: np.cos(k * domain.polar_angle(p))
    raise DomainError(f"unknown density id '{identifier}'")


class Atom(BaseModel):
    x: float
    y: float
    mass: float

    @property
    def location(self) -> np.ndarray:
        return np.array([self.x, self.y])


class MeasureData(BaseModel):
    """Signed measure = atoms + scale * density, supported in the interior or on Gamma_2."""

    atoms: List[Atom] = Field(default_factory=list)
    density: Optional[str] = Field(None, description="Catalogued density id or null")
    scale: float = Field(1.0, description="Multiplier applied to the density")
    support: Literal["interior", "gamma2"] = "interior"

    @field_validator("density")
    @classmethod
    def _known_density(cls, v: Optional[str]) -> Optional[str]:
        if v is not None:
            density_function(v, Domain())
        return v

    @classmethod
    def zero(cls, support: str = "interior") -> "MeasureData":
        return cls(support=support)

    @classmethod
    def dirac(cls, point: Sequence[float], mass: float = 1.0, support: str = "interior") -> "MeasureData":
        return cls(atoms=[Atom(x=point[0], y=point[1], mass=mass)], support=support)

    @property
    def is_zero(self) -> bool:
        return all(a.mass == 0.0 for a in self.atoms) and (self.density is None or self.scale == 0.0)

    @property
    def atom_mass(self) -> float:
        return float(sum(a.mass for a in self.atoms))

    def density_field(self, domain: Domain) -> Optional[Field2D]:
        if self.density is None or self.scale == 0.0:
            return None
        f = density_function(self.density, domain)
        scale = self.scale
        return lambda p: scale * f(p)

    def check_support(self, mesh: Mesh) -> None:
        """Reject atoms outside the admissible support (interior of Omega, or the open arcs of Gamma_2)."""
        tol = 1e-12 * max(mesh.domain.radius, 1.0)
        for atom in self.atoms:
            sd = float(mesh.domain.signed_distance(atom.location)[0])
            if self.support == "interior":
                if sd <= tol:
                    raise DomainError(f"interior atom at ({atom.x}, {atom.y}) is not strictly inside the domain")
            else:
                if abs(sd) > 1e-9:
                    raise DomainError(f"boundary atom at ({atom.x}, {atom.y}) is not on the boundary")
                if _arc_clearance(mesh, atom.location) <= tol:
                    raise DomainError(f"boundary atom at ({atom.x}, {atom.y}) lies on Gamma_1 or the interface")


def _arc_clearance(mesh: Mesh, point: np.ndarray) -> float:
    """Arc distance from a boundary point to Gamma_1 (0 when the point is on Gamma_1)."""
    P = mesh.domain.perimeter
    s = float(mesh.domain.boundary_param(point)[0])
    intervals = mesh.flux_intervals()
    inside = ((s >= intervals[:, 0]) & (s <= intervals[:, 1])) | \
             ((s + P >= intervals[:, 0]) & (s + P <= intervals[:, 1]))
    if not np.any(inside):
        return 0.0
    ends = mesh.dirichlet_endpoint_params()
    gap = np.abs(ends - s)
    return float(np.min(np.minimum(gap, P - gap)))


# ------------------------------------------------------------------ profiles
class BumpProfile(BaseModel):
    """Radial mollifier profile with closed-form normalization in 1D and 2D."""

    name: Literal["quartic", "tent"] = "quartic"

    def shape(self, rho: np.ndarray) -> np.ndarray:
        rho = np.clip(np.abs(rho), 0.0, 1.0)
        if self.name == "quartic":
            return (1.0 - rho ** 2) ** 2
        return 1.0 - rho

    def peak(self, r: float, dim: int) -> float:
        """Normalizing constant c so that c * shape(|x|/r) has unit mass."""
        if dim == 2:
            return 3.0 / (math.pi * r * r)
        return 15.0 / (16.0 * r) if self.name == "quartic" else 1.0 / r


# --------------------------------------------------------- domain quadrature
def domain_rule(domain: Domain) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature on the exact domain (polar for the disk, tensor for the square)."""
    cells = 8
    t, w = gauss_legendre(HarnessConfig.GRADED_POINTS)
    edges = np.linspace(0.0, 1.0, cells + 1)
    nodes = np.concatenate([a + (b - a) * t for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    if domain.kind == "disk":
        R = domain.radius
        n_ang = 4 * HarnessConfig.BUMP_ANGULAR_POINTS
        phi = 2.0 * math.pi * (np.arange(n_ang) + 0.5) / n_ang
        rho, P = np.meshgrid(R * nodes, phi, indexing="ij")
        pts = np.column_stack(((rho * np.cos(P)).ravel(), (rho * np.sin(P)).ravel()))
        wts = np.outer(R * weights * R * nodes, np.full(n_ang, 2.0 * math.pi / n_ang)).ravel()
        return pts, wts
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    return np.column_stack((X.ravel(), Y.ravel())), np.outer(weights, weights).ravel()


def gamma2_rule(mesh: Mesh, n: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Arc-length parameters and weights covering Gamma_2 along the exact boundary curve."""
    n = HarnessConfig.BUMP_ARC_POINTS if n is None else n
    intervals = mesh.flux_intervals()
    if len(intervals) == 0:
        return np.zeros(0), np.zeros(0)
    t, w = gauss_legendre(n)
    length = intervals[:, 1] - intervals[:, 0]
    s = intervals[:, :1] + length[:, None] * t[None, :]
    return np.mod(s.ravel(), mesh.domain.perimeter), (length[:, None] * w[None, :]).ravel()


# ------------------------------------------------------------------ mollify
class MollifiedMeasure(BaseModel):
    """Weak-* approximation at index n, as a weighted point cloud on the mesh's domain."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    parent: MeasureData
    profile: BumpProfile
    points: np.ndarray = Field(..., description="(P, 2) sample locations")
    weights: np.ndarray = Field(..., description="(P,) signed sample masses")
    params: Optional[np.ndarray] = Field(None, description="arc-length parameters for boundary samples")
    radii: List[float] = Field(default_factory=list)
    density_peak: float = 0.0

    @property
    def support(self) -> str:
        return self.parent.support

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def l1_norm(self) -> float:
        """Total variation of the mollified data."""
        return float(np.sum(np.abs(self.weights)))

    @property
    def sup_norm(self) -> float:
        """Upper bound for the sup-norm of the mollified density."""
        dim = 2 if self.support == "interior" else 1
        bumps = sum(abs(a.mass) * self.profile.peak(r, dim) for a, r in zip(self.parent.atoms, self.radii))
        return float(bumps + self.density_peak)

    def pair(self, test_field: Field2D) -> float:
        if len(self.weights) == 0:
            return 0.0
        return float(np.sum(self.weights * np.asarray(test_field(self.points), dtype=float)))

    def hat_pairing(self, mesh: Mesh) -> np.ndarray:
        """Vector of pairings with every P1 hat function of the mesh."""
        out = np.zeros(mesh.num_vertices)
        if len(self.weights) == 0:
            return out
        if self.support == "interior":
            tri, lam = mesh.locate(self.points)
            nodes = mesh.triangles[tri]
            for j in range(3):
                out += np.bincount(nodes[:, j], weights=self.weights * lam[:, j], minlength=mesh.num_vertices)
            return out
        edge, t = mesh.locate_params(self.params)
        a, b = mesh.boundary_edges[edge, 0], mesh.boundary_edges[edge, 1]
        out += np.bincount(a, weights=self.weights * (1.0 - t), minlength=mesh.num_vertices)
        out += np.bincount(b, weights=self.weights * t, minlength=mesh.num_vertices)
        return out


def _interior_bump(center: np.ndarray, r: float, profile: BumpProfile) -> Tuple[np.ndarray, np.ndarray]:
    rho, wr = gauss_legendre(HarnessConfig.BUMP_RADIAL_POINTS, 0.0, r)
    n_ang = HarnessConfig.BUMP_ANGULAR_POINTS
    phi = 2.0 * math.pi * (np.arange(n_ang) + 0.5) / n_ang
    R, P = np.meshgrid(rho, phi, indexing="ij")
    pts = center + np.column_stack(((R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()))
    q = np.outer(wr * rho * profile.shape(rho / r), np.ones(n_ang)).ravel()
    return pts, q / np.sum(q)


def _arc_bump(s0: float, r: float, profile: BumpProfile) -> Tuple[np.ndarray, np.ndarray]:
    n = HarnessConfig.BUMP_ARC_POINTS
    left, wl = gauss_legendre(n, s0 - r, s0)
    right, wr = gauss_legendre(n, s0, s0 + r)
    s = np.concatenate((left, right))
    q = np.concatenate((wl, wr)) * profile.shape((s - s0) / r)
    return s, q / np.sum(q)


def initial_radius(measure: MeasureData, atom: Atom, mesh: Mesh) -> float:
    """r0: half the distance to the boundary (interior) or half the arc distance to Gamma_1 (boundary)."""
    if measure.support == "interior":
        return 0.5 * float(mesh.domain.distance(atom.location)[0])
    return 0.5 * _arc_clearance(mesh, atom.location)


def mollify(measure: MeasureData, n: int, mesh: Mesh, profile: Optional[BumpProfile] = None,
            r0: Optional[float] = None) -> MollifiedMeasure:
    """
    Replace each atom by a normalized bump of radius r0 * 2**-n; densities are kept.

    A requested r0 that would let interior mass reach the boundary (or boundary
    mass reach Gamma_1) is shrunk to the admissible radius with a warning.
    """
    if n < 1:
        raise DomainError(f"mollification index must be >= 1, got {n}")
    profile = profile or BumpProfile()
    measure.check_support(mesh)
    points, weights, params, radii = [], [], [], []
    boundary = measure.support == "gamma2"
    for atom in measure.atoms:
        admissible = initial_radius(measure, atom, mesh)
        base = admissible if r0 is None else r0
        if base > admissible:
            logger.warning(f"⚠️ bump radius {base:.4g} exceeds admissible {admissible:.4g} "
                           f"for atom ({atom.x}, {atom.y}); shrinking")
            base = admissible
        r = base * 2.0 ** (-n)
        radii.append(r)
        if boundary:
            s0 = float(mesh.domain.boundary_param(atom.location)[0])
            s, q = _arc_bump(s0, r, profile)
            s = np.mod(s, mesh.domain.perimeter)
            params.append(s)
            points.append(mesh.domain.boundary_point(s))
        else:
            pts, q = _interior_bump(atom.location, r, profile)
            points.append(pts)
        weights.append(atom.mass * q)

    density_peak = 0.0
    f = measure.density_field(mesh.domain)
    if f is not None:
        if boundary:
            s, w = gamma2_rule(mesh)
            pts = mesh.domain.boundary_point(s)
            params.append(s)
        else:
            pts, w = domain_rule(mesh.domain)
        values = f(pts)
        density_peak = float(np.max(np.abs(values))) if len(values) else 0.0
        points.append(pts)
        weights.append(w * values)

    def stack(parts, shape):
        return np.concatenate(parts) if parts else np.zeros(shape)

    return MollifiedMeasure(
        n=n, parent=measure, profile=profile,
        points=stack(points, (0, 2)).reshape(-1, 2),
        weights=stack(weights, (0,)),
        params=stack(params, (0,)) if boundary else None,
        radii=radii, density_peak=density_peak,
    )


# ----------------------------------------------------------------- pairings
def pair(measure, test_field: Field2D, mesh: Optional[Mesh] = None) -> float:
    """
    Sum of mass * field(atom) plus the integral of density * field.

    Interior densities are integrated over the exact domain, boundary densities
    over Gamma_2 (which requires the mesh carrying the partition).
    """
    if isinstance(measure, MollifiedMeasure):
        return measure.pair(test_field)
    total = 0.0
    if measure.atoms:
        locs = np.array([[a.x, a.y] for a in measure.atoms])
        masses = np.array([a.mass for a in measure.atoms])
        total += float(np.sum(masses * np.asarray(test_field(locs), dtype=float)))
    if measure.density is not None and measure.scale != 0.0:
        if mesh is None:
            raise DomainError("pairing a density requires the mesh (domain and partition)")
        f = measure.density_field(mesh.domain)
        if measure.support == "interior":
            pts, w = domain_rule(mesh.domain)
        else:
            s, w = gamma2_rule(mesh)
            pts = mesh.domain.boundary_point(s)
        total += float(np.sum(w * f(pts) * test_field(pts)))
    return total


def total_variation(measure: MeasureData, mesh: Optional[Mesh] = None) -> float:
    """Sum of |mass| plus the integral of |density|."""
    tv = float(sum(abs(a.mass) for a in measure.atoms))
    if measure.density is not None and measure.scale != 0.0:
        if mesh is None:
            raise DomainError("density total variation requires the mesh")
        f = measure.density_field(mesh.domain)
        if measure.support == "interior":
            pts, w = domain_rule(mesh.domain)
        else:
            s, w = gamma2_rule(mesh)
            pts = mesh.domain.boundary_point(s)
        tv += float(np.sum(w * np.abs(f(pts))))
    return tv


def default_test_suite() -> List[Field2D]:
    """Polynomials up to degree 3 and two trigonometric fields."""
    suite: List[Field2D] = []
    for i in range(4):
        for j in range(4 - i):
            suite.append(lambda p, i=i, j=j: p[:, 0] ** i * p[:, 1] ** j)
    suite.append(lambda p: np.sin(math.pi * p[:, 0]) * np.cos(math.pi * p[:, 1]))
    suite.append(lambda p: np.cos(2.0 * p[:, 0] + p[:, 1]))
    return suite


def weakstar_gap(measure: MeasureData, mollified: MollifiedMeasure,
                 test_suite: Optional[List[Field2D]] = None, mesh: Optional[Mesh] = None) -> float:
    """max over the suite of |pair(measure, f) - pair(mollified, f)|."""
    suite = default_test_suite() if test_suite is None else test_suite
    if not suite:
        raise DomainError("weak-* gap needs a nonempty test suite")
    return max(abs(pair(measure, f, mesh) - mollified.pair(f)) for f in suite)
