"""
Gagliardo seminorm of the P1 boundary trace of order s = 1 - (1 + alpha)/q.

The double integral over the boundary polygon is split by edge pairs:
same edge in closed form, edges sharing a vertex by a Duffy split of the
corner singularity, and all other pairs by tensor Gauss.
"""
import logging
from typing import Tuple

import numpy as np

from config import HarnessConfig
from fem.errors import DomainError
from fem.quadrature import edge_rule, gauss_legendre

from .functionals import trace_order

logger = logging.getLogger(__name__)

_CHUNK = 32


def _trace_order_checked(q: float, alpha: float) -> float:
    if not q > 1.0:
        raise DomainError(f"trace norm needs q > 1, got {q}")
    s = trace_order(q, alpha)
    if not 0.0 < s < 1.0:
        raise DomainError(f"fractional order s* = 1 - (1+alpha)/q = {s:.4g} must lie in (0, 1)")
    return s


def _next_edge(edges: np.ndarray) -> np.ndarray:
    """Index of the edge starting where each edge ends (ccw successor)."""
    start = {int(a): i for i, a in enumerate(edges[:, 0])}
    return np.array([start[int(b)] for b in edges[:, 1]])


def _composite_unit_rule(cells: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    t, w = gauss_legendre(HarnessConfig.GRADED_POINTS)
    nodes = np.concatenate([(k + t) / cells for k in range(cells)])
    return nodes, np.tile(w, cells) / cells


def _same_edge(lengths: np.ndarray, slopes: np.ndarray, q: float, alpha: float) -> float:
    # |Tu(x)-Tu(y)| = |slope||x-y| and q - 1 - s q = alpha
    return float(np.sum(np.abs(slopes) ** q * 2.0 * lengths ** (alpha + 2.0)) / ((alpha + 1.0) * (alpha + 2.0)))


def _adjacent(vertices, edges, u, nxt, q: float, s: float, alpha: float) -> float:
    eta, w = _composite_unit_rule()
    e = np.arange(len(edges))
    f = nxt
    v = edges[e, 1]
    Le = np.linalg.norm(vertices[edges[e, 1]] - vertices[edges[e, 0]], axis=1)
    Lf = np.linalg.norm(vertices[edges[f, 1]] - vertices[edges[f, 0]], axis=1)
    de = (vertices[edges[e, 0]] - vertices[v]) / Le[:, None]
    df = (vertices[edges[f, 1]] - vertices[v]) / Lf[:, None]
    ge = (u[edges[e, 0]] - u[v]) / Le
    gf = (u[edges[f, 1]] - u[v]) / Lf
    p = 1.0 + s * q

    def piece(ca, cb, Da, Db):
        num = np.abs(ca[:, None] - cb[:, None] * eta[None, :]) ** q
        den = np.linalg.norm(Da[:, None, :] - eta[None, :, None] * Db[:, None, :], axis=2) ** p
        return np.sum(num / den * w[None, :], axis=1)

    tri1 = piece(ge * Le, gf * Lf, Le[:, None] * de, Lf[:, None] * df)
    tri2 = piece(gf * Lf, ge * Le, Lf[:, None] * df, Le[:, None] * de)
    per_pair = Le * Lf * (tri1 + tri2) / (alpha + 2.0)
    # both orderings of each adjacent pair
    return float(2.0 * np.sum(per_pair))


def _far(vertices, edges, u, nxt, q: float, s: float) -> float:
    n = HarnessConfig.GRADED_POINTS
    pts, wts = edge_rule(vertices[edges[:, 0]], vertices[edges[:, 1]], n)
    t, _ = gauss_legendre(n)
    vals = u[edges[:, 0], None] * (1.0 - t)[None, :] + u[edges[:, 1], None] * t[None, :]
    E = len(edges)
    prev = np.empty(E, dtype=np.int64)
    prev[nxt] = np.arange(E)
    p = 1.0 + s * q
    total = 0.0
    for lo in range(0, E, _CHUNK):
        rows = np.arange(lo, min(lo + _CHUNK, E))
        diff = pts[rows][:, None, :, None, :] - pts[None, :, None, :, :]       # (c, E, n, n, 2)
        dist = np.linalg.norm(diff, axis=-1)
        jump = np.abs(vals[rows][:, None, :, None] - vals[None, :, None, :]) ** q
        mask = np.ones((len(rows), E), dtype=bool)
        mask[np.arange(len(rows)), rows] = False
        mask[np.arange(len(rows)), nxt[rows]] = False
        mask[np.arange(len(rows)), prev[rows]] = False
        with np.errstate(divide="ignore", invalid="ignore"):
            kernel = np.where(mask[:, :, None, None], jump / dist ** p, 0.0)
        total += float(np.einsum("ceij,ci,ej->", kernel, wts[rows], wts))
    return total


def trace_gagliardo_seminorm(u, q: float, alpha: float) -> float:
    """[Tu]_{s,q} = (double integral of |Tu(x)-Tu(y)|^q / |x-y|^(1+s q))^(1/q)."""
    s = _trace_order_checked(q, alpha)
    mesh = u.mesh
    edges = mesh.boundary_edges
    vertices = mesh.vertices
    coeffs = np.asarray(u.coefficients, dtype=float)
    lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    slopes = (coeffs[edges[:, 1]] - coeffs[edges[:, 0]]) / lengths
    nxt = _next_edge(edges)
    total = (_same_edge(lengths, slopes, q, alpha)
             + _adjacent(vertices, edges, coeffs, nxt, q, s, alpha)
             + _far(vertices, edges, coeffs, nxt, q, s))
    return total ** (1.0 / q)


def trace_Lq_norm(u, q: float) -> float:
    """(integral over the whole boundary of |Tu|^q)^(1/q)."""
    mesh = u.mesh
    edges = mesh.boundary_edges
    n = HarnessConfig.EDGE_GAUSS_POINTS
    _, wts = edge_rule(mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]], n)
    t, _ = gauss_legendre(n)
    coeffs = np.asarray(u.coefficients, dtype=float)
    vals = coeffs[edges[:, 0], None] * (1.0 - t)[None, :] + coeffs[edges[:, 1], None] * t[None, :]
    return float(np.sum(wts * np.abs(vals) ** q)) ** (1.0 / q)


def trace_gagliardo_norm(u, q: float, alpha: float) -> float:
    """(||Tu||_q^q + [Tu]_{s,q}^q)^(1/q) with s = 1 - (1 + alpha)/q."""
    seminorm = trace_gagliardo_seminorm(u, q, alpha)
    return (trace_Lq_norm(u, q) ** q + seminorm ** q) ** (1.0 / q)
