"""
Conforming triangular meshes of the reference domains.

Credits for the connectivity bookkeeping style: scikit-fem's MeshTri.
"""
import json
import logging
import math
import threading
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from config import HarnessConfig
from .domain import (DIRICHLET, FLUX, LABEL_CODES, LABEL_NAMES, BoundaryPartitionRule,
                     Domain)
from .errors import DomainError, MeshResourceError, MeshValidationError

logger = logging.getLogger(__name__)

GRADED_RING_VERTICES = 18
GRADED_RING_RATIO = math.sqrt(2.0)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Mesh:
    """
    Immutable P1 triangulation with a labelled boundary.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counter-clockwise
    boundary_edges : (B, 2) int array, oriented with the domain on the left
    edge_labels : (B,) int array of DIRICHLET / FLUX
    domain : Domain the mesh approximates
    """

    def __init__(self, vertices, triangles, boundary_edges, edge_labels,
                 domain: Domain, validate: bool = True):
        self.vertices = _readonly(np.array(vertices, dtype=float).reshape(-1, 2))
        self.triangles = _readonly(np.array(triangles, dtype=np.int64).reshape(-1, 3))
        self.boundary_edges = _readonly(_orient_boundary(
            self.triangles, np.array(boundary_edges, dtype=np.int64).reshape(-1, 2)))
        self.edge_labels = _readonly(np.array(edge_labels, dtype=np.int64).reshape(-1))
        self.domain = domain
        self._cache: Dict[Any, Any] = {}
        self._cache_lock = threading.Lock()
        self._locator: Optional[cKDTree] = None
        if validate:
            self.validate()

    def __repr__(self) -> str:
        return (f"Mesh({self.domain.kind}, {self.num_vertices} vertices, "
                f"{self.num_triangles} triangles, h_max={self.h_max:.4g})")

    # ------------------------------------------------------------------ sizes
    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges (E, 2), sorted vertex pairs."""
        return self.cached("edges", lambda: _unique_edges(self.triangles)[0])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def h_max(self) -> float:
        e = self.edges
        return float(np.max(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    @property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    @property
    def total_area(self) -> float:
        return float(np.sum(self.signed_areas))

    # --------------------------------------------------------------- boundary
    @property
    def boundary_vertex_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @property
    def dirichlet_vertex_mask(self) -> np.ndarray:
        """Vertices on the closed Dirichlet part (interface vertices included)."""
        mask = np.zeros(self.num_vertices, dtype=bool)
        mask[self.boundary_edges[self.edge_labels == DIRICHLET].ravel()] = True
        return mask

    @property
    def free_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.dirichlet_vertex_mask)

    @property
    def flux_edges(self) -> np.ndarray:
        return self.boundary_edges[self.edge_labels == FLUX]

    @property
    def has_flux_boundary(self) -> bool:
        return bool(np.any(self.edge_labels == FLUX))

    def boundary_edge_params(self) -> np.ndarray:
        """(B, 2) arc-length parameters of boundary edge endpoints, unwrapped so s1 > s0."""
        def build():
            s = self.domain.boundary_param(self.vertices[self.boundary_edges.ravel()]).reshape(-1, 2)
            wrap = s[:, 1] <= s[:, 0]
            s[wrap, 1] += self.domain.perimeter
            return _readonly(s)
        return self.cached("boundary_edge_params", build)

    def flux_intervals(self) -> np.ndarray:
        """Parameter intervals of the Flux edges."""
        return self.boundary_edge_params()[self.edge_labels == FLUX]

    def dirichlet_endpoint_params(self) -> np.ndarray:
        """Arc-length parameters of all vertices on Dirichlet edges."""
        s = self.boundary_edge_params()[self.edge_labels == DIRICHLET]
        return np.mod(s.ravel(), self.domain.perimeter)

    # ------------------------------------------------------------- invariants
    def validate(self) -> None:
        """Raise MeshValidationError unless every Mesh invariant holds."""
        if self.num_triangles == 0:
            raise MeshValidationError("mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= self.num_vertices:
            raise MeshValidationError("triangle index out of range")
        areas = self.signed_areas
        if np.any(areas <= 0.0):
            bad = int(np.flatnonzero(areas <= 0.0)[0])
            raise MeshValidationError(f"triangle {bad} has non-positive signed area {areas[bad]:.3e}")
        edges, counts = _unique_edges(self.triangles)
        if np.any(counts > 2):
            raise MeshValidationError("an edge is shared by more than two triangles")
        topo = edges[counts == 1]
        labelled = np.sort(self.boundary_edges, axis=1)
        if len(labelled) != len(np.unique(labelled, axis=0)):
            raise MeshValidationError("duplicate boundary edge")
        if len(topo) != len(labelled) or not np.array_equal(
                np.unique(topo, axis=0), np.unique(labelled, axis=0)):
            raise MeshValidationError("labelled edges differ from the topological boundary")
        if len(self.edge_labels) != len(self.boundary_edges):
            raise MeshValidationError("one label per boundary edge is required")
        if not np.all(np.isin(self.edge_labels, [DIRICHLET, FLUX])):
            raise MeshValidationError("unknown boundary label")
        if not np.any(self.edge_labels == DIRICHLET):
            raise MeshValidationError("Dirichlet part Gamma_1 must be nonempty")

    # ----------------------------------------------------------------- caches
    def cached(self, key, factory):
        """One-time, lock-guarded construction of derived data."""
        value = self._cache.get(key)
        if value is None:
            with self._cache_lock:
                value = self._cache.get(key)
                if value is None:
                    value = factory()
                    self._cache[key] = value
        return value

    # ---------------------------------------------------------- P1 machinery
    def gradients(self) -> np.ndarray:
        """(T, 3, 2) constant gradients of the three hat functions on each triangle."""
        def build():
            p = self.vertices[self.triangles]
            area2 = 2.0 * self.signed_areas
            grads = np.empty((self.num_triangles, 3, 2))
            for i in range(3):
                j, k = (i + 1) % 3, (i + 2) % 3
                grads[:, i, 0] = (p[:, j, 1] - p[:, k, 1]) / area2
                grads[:, i, 1] = (p[:, k, 0] - p[:, j, 0]) / area2
            return _readonly(grads)
        return self.cached("gradients", build)

    def locate(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Triangle index and barycentric coordinates of each point.

        Candidates come from the nearest triangle centroids; a point none of
        them contains is searched against every triangle. Points between the
        polygon and a curved boundary are attached to the nearest candidate
        with clipped coordinates, points outside the domain raise DomainError.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._locator is None:
            with self._cache_lock:
                if self._locator is None:
                    self._locator = cKDTree(self.vertices[self.triangles].mean(axis=1))
        k = max(1, min(HarnessConfig.LOCATE_CANDIDATES, self.num_triangles))
        _, cand = self._locator.query(pts, k=k)
        cand = np.asarray(cand).reshape(len(pts), k)
        bary = self._barycentric(pts[:, None, :], cand)
        worst = bary.min(axis=2)
        pick = np.argmax(worst, axis=1)
        rows = np.arange(len(pts))
        tri = cand[rows, pick]
        lam = bary[rows, pick]
        missed = np.flatnonzero(worst[rows, pick] < -1e-10)
        if len(missed):
            outside = []
            every = np.arange(self.num_triangles)
            for i in missed:
                full = self._barycentric(pts[i], every)
                best = int(np.argmax(full.min(axis=1)))
                if full[best].min() >= -1e-10:
                    tri[i], lam[i] = best, full[best]
                else:
                    outside.append(i)
            if outside:
                outside = np.array(outside)
                sd = self.domain.signed_distance(pts[outside])
                tol = 1e-9 * max(self.domain.radius, 1.0)
                if np.any(sd < -tol):
                    p = pts[outside[np.argmin(sd)]]
                    raise DomainError(f"point ({p[0]:.6g}, {p[1]:.6g}) lies outside the {self.domain.kind}")
                lam[outside] = np.clip(lam[outside], 0.0, None)
                lam[outside] /= lam[outside].sum(axis=1, keepdims=True)
            logger.debug(f"locate: {len(missed)} point(s) needed the full search, {len(outside)} clipped")
        return tri, lam

    def _barycentric(self, pts: np.ndarray, tri: np.ndarray) -> np.ndarray:
        p = self.vertices[self.triangles[tri]]
        a, b, c = p[..., 0, :], p[..., 1, :], p[..., 2, :]
        det = (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (c[..., 0] - a[..., 0]) * (b[..., 1] - a[..., 1])
        l1 = ((pts[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (c[..., 0] - a[..., 0]) * (pts[..., 1] - a[..., 1])) / det
        l2 = ((b[..., 0] - a[..., 0]) * (pts[..., 1] - a[..., 1]) - (pts[..., 0] - a[..., 0]) * (b[..., 1] - a[..., 1])) / det
        return np.stack((1.0 - l1 - l2, l1, l2), axis=-1)

    def evaluate(self, coefficients, points) -> np.ndarray:
        """Evaluate the P1 interpolant with the given nodal values at points."""
        tri, lam = self.locate(points)
        return np.sum(np.asarray(coefficients)[self.triangles[tri]] * lam, axis=1)

    def interpolate(self, field) -> np.ndarray:
        """Nodal values of a callable field f(points) -> values."""
        return np.asarray(field(self.vertices), dtype=float).reshape(self.num_vertices)

    def locate_params(self, s) -> Tuple[np.ndarray, np.ndarray]:
        """Boundary edge index and local coordinate t in [0, 1] for arc-length parameters s."""
        params = self.boundary_edge_params()
        order = np.argsort(params[:, 0])
        starts = params[order, 0]
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self.domain.perimeter)
        idx = np.searchsorted(starts, s, side="right") - 1
        shifted = idx < 0
        idx[shifted] = len(starts) - 1
        edge = order[idx]
        s_local = np.where(shifted, s + self.domain.perimeter, s)
        t = np.clip((s_local - params[edge, 0]) / (params[edge, 1] - params[edge, 0]), 0.0, 1.0)
        return edge, t

    def trace_at_params(self, coefficients, s) -> np.ndarray:
        """P1 trace evaluated at boundary arc-length parameters s."""
        edge, t = self.locate_params(s)
        u = np.asarray(coefficients)
        a, b = self.boundary_edges[edge, 0], self.boundary_edges[edge, 1]
        return (1.0 - t) * u[a] + t * u[b]

    # ---------------------------------------------------------- serialization
    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": [
                {"a": int(a), "b": int(b), "label": LABEL_NAMES[int(lab)]}
                for (a, b), lab in zip(self.boundary_edges, self.edge_labels)
            ],
            "h_max": self.h_max,
            "domain": self.domain.model_dump(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "Mesh":
        """Load a mesh document, rejecting anything that violates the invariants."""
        try:
            edges = document["boundary_edges"]
            labels = [LABEL_CODES[e["label"]] for e in edges]
            mesh = cls(
                vertices=document["vertices"],
                triangles=document["triangles"],
                boundary_edges=[[e["a"], e["b"]] for e in edges],
                edge_labels=labels,
                domain=Domain.model_validate(document.get("domain", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MeshValidationError):
                raise
            raise MeshValidationError(f"malformed mesh document: {exc}") from exc
        declared = float(document.get("h_max", mesh.h_max))
        if not math.isclose(declared, mesh.h_max, rel_tol=1e-12, abs_tol=0.0):
            raise MeshValidationError(f"declared h_max {declared} != measured {mesh.h_max}")
        return mesh

    @classmethod
    def from_json(cls, text: str) -> "Mesh":
        return cls.from_dict(json.loads(text))


def _unique_edges(triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    local = np.vstack((triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]))
    return np.unique(np.sort(local, axis=1), axis=0, return_counts=True)


def _orient_boundary(triangles: np.ndarray, boundary_edges: np.ndarray) -> np.ndarray:
    """Flip boundary edges so that each runs along its triangle's ccw orientation."""
    if len(triangles) == 0 or len(boundary_edges) == 0:
        return boundary_edges
    V = int(max(triangles.max(), boundary_edges.max())) + 1
    directed = np.vstack((triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]))
    forward = np.isin(boundary_edges[:, 0] * V + boundary_edges[:, 1], directed[:, 0] * V + directed[:, 1])
    oriented = boundary_edges.copy()
    oriented[~forward] = oriented[~forward][:, ::-1]
    return oriented


def _boundary_from_triangles(triangles: np.ndarray) -> np.ndarray:
    """Oriented boundary edges (domain on the left) of a ccw triangulation."""
    directed = np.vstack((triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]))
    _, inverse, counts = np.unique(np.sort(directed, axis=1), axis=0,
                                   return_inverse=True, return_counts=True)
    return directed[counts[inverse.ravel()] == 1]


def _check_budget(num_vertices: int) -> None:
    if num_vertices > HarnessConfig.MAX_MESH_VERTICES:
        raise MeshResourceError(
            f"mesh would need {num_vertices} vertices, above MAX_MESH_VERTICES="
            f"{HarnessConfig.MAX_MESH_VERTICES}")


def _finish(vertices: np.ndarray, triangles: np.ndarray, domain: Domain,
            rule: BoundaryPartitionRule) -> Mesh:
    p = vertices[triangles]
    signed = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
              - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = signed < 0
    triangles = triangles.copy()
    triangles[flip] = triangles[flip][:, [0, 2, 1]]
    bnd = _boundary_from_triangles(triangles)
    labels = rule.label(domain, 0.5 * (vertices[bnd[:, 0]] + vertices[bnd[:, 1]]))
    return Mesh(vertices, triangles, bnd, labels, domain)


def _disk_rings(radius: float, m: int, center_grading: int):
    """(radius, vertex count) of every ring, innermost first."""
    if not center_grading:
        return [(radius * k / m, 6 * k) for k in range(1, m + 1)]
    if m < 3:
        raise DomainError(f"center grading needs h_target <= radius / 3, got {m} rings")
    # ring 3 of the uniform layout already carries 18 vertices
    outer = 3.0 * radius / m
    graded = [(outer * GRADED_RING_RATIO ** (-j), GRADED_RING_VERTICES) for j in range(center_grading, 0, -1)]
    return graded + [(radius * k / m, 6 * k) for k in range(3, m + 1)]


def generate_disk_mesh(radius: float, h_target: float,
                       rule: Optional[BoundaryPartitionRule] = None, center_grading: int = 0) -> Mesh:
    """
    Concentric-ring triangulation of the disk of the given radius.

    Ring k (k = 1..m) carries 6k equally spaced vertices at radius k*radius/m,
    with m = ceil(radius / h_target). With center_grading = d > 0 the rings
    inside radius 3*radius/m are replaced by d rings of 18 vertices whose
    radii shrink by sqrt(2) toward the center, so the smallest cell near the
    origin is about 2**(-d/2) times the uniform one without increasing h_max.
    """
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")
    if not 0 < h_target < radius:
        raise DomainError(f"h_target must lie in (0, radius), got {h_target}")
    if center_grading < 0:
        raise DomainError(f"center_grading must be >= 0, got {center_grading}")
    rule = rule or BoundaryPartitionRule()
    m = int(math.ceil(radius / h_target - 1e-12))
    ring_layout = _disk_rings(radius, m, center_grading)
    _check_budget(1 + sum(count for _, count in ring_layout))

    rings = [np.array([0])]
    points = [np.zeros((1, 2))]
    offset = 1
    for index, (r, count) in enumerate(ring_layout):
        phi = 2.0 * math.pi * np.arange(count) / count
        if index == len(ring_layout) - 1:
            r = radius
        points.append(np.column_stack((r * np.cos(phi), r * np.sin(phi))))
        rings.append(offset + np.arange(count))
        offset += count
    vertices = np.vstack(points)

    tris = []
    first = rings[1]
    for j in range(len(first)):
        tris.append((0, first[j], first[(j + 1) % len(first)]))
    for k in range(1, len(rings) - 1):
        inner, outer = rings[k], rings[k + 1]
        ni, no = len(inner), len(outer)
        i = o = 0
        while i < ni or o < no:
            advance_outer = i >= ni or (o < no and (o + 1) / no <= (i + 1) / ni)
            if advance_outer:
                tris.append((inner[i % ni], outer[o % no], outer[(o + 1) % no]))
                o += 1
            else:
                tris.append((inner[i % ni], outer[o % no], inner[(i + 1) % ni]))
                i += 1
    mesh = _finish(vertices, np.array(tris, dtype=np.int64), Domain(kind="disk", radius=radius), rule)
    logger.info(f"Generated disk mesh: {mesh}")
    return mesh


def generate_square_mesh(h_target: float, rule: Optional[BoundaryPartitionRule] = None) -> Mesh:
    """Structured right-triangle mesh of the unit square; corner cells keep one interior vertex."""
    if not 0 < h_target < 1.0:
        raise DomainError(f"h_target must lie in (0, 1), got {h_target}")
    rule = rule or BoundaryPartitionRule(kind="axis-split", offset=0.5)
    n = max(2, int(math.ceil(1.0 / h_target - 1e-12)))
    _check_budget((n + 1) ** 2)
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack((X.ravel(), Y.ravel()))

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            p00, p10, p11, p01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            anti = (i == n - 1 and j == 0) or (i == 0 and j == n - 1)
            if anti:
                tris.extend([(p00, p10, p01), (p10, p11, p01)])
            else:
                tris.extend([(p00, p10, p11), (p00, p11, p01)])
    mesh = _finish(vertices, np.array(tris, dtype=np.int64), Domain(kind="square"), rule)
    logger.info(f"Generated square mesh: {mesh}")
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """
    Uniform red refinement: every triangle split into four.

    Boundary labels are inherited by both halves of a split edge; new boundary
    vertices are projected onto the exact boundary curve.
    """
    V = mesh.num_vertices
    edges = mesh.edges
    _check_budget(V + len(edges))
    keys = edges[:, 0] * V + edges[:, 1]

    def edge_id(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.searchsorted(keys, lo * V + hi)

    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    bnd_ids = edge_id(mesh.boundary_edges[:, 0], mesh.boundary_edges[:, 1])
    mids[bnd_ids] = mesh.domain.project(mids[bnd_ids])
    vertices = np.vstack((mesh.vertices, mids))

    t = mesh.triangles
    m01 = V + edge_id(t[:, 0], t[:, 1])
    m12 = V + edge_id(t[:, 1], t[:, 2])
    m20 = V + edge_id(t[:, 2], t[:, 0])
    triangles = np.vstack((
        np.column_stack((t[:, 0], m01, m20)),
        np.column_stack((m01, t[:, 1], m12)),
        np.column_stack((m20, m12, t[:, 2])),
        np.column_stack((m01, m12, m20)),
    ))
    bm = V + bnd_ids
    boundary_edges = np.vstack((
        np.column_stack((mesh.boundary_edges[:, 0], bm)),
        np.column_stack((bm, mesh.boundary_edges[:, 1])),
    ))
    labels = np.concatenate((mesh.edge_labels, mesh.edge_labels))
    refined = Mesh(vertices, triangles, boundary_edges, labels, mesh.domain)
    logger.info(f"Refined mesh: {refined}")
    return refined


def distance_to_boundary(mesh: Mesh, point) -> float:
    """Exact analytic distance from an interior point to the boundary of the mesh's domain."""
    return float(mesh.domain.distance(np.asarray(point, dtype=float).reshape(1, 2))[0])
