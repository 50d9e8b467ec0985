"""
Sparse assembly of the weighted stiffness operator, the nonlinear boundary
term and the mollified load.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .errors import NumericError
from .measure import MollifiedMeasure
from .mesh import Mesh
from .quadrature import edge_rule, gauss_legendre
from .weight import mesh_quadrature

logger = logging.getLogger(__name__)


def element_stiffness(mesh: Mesh, alpha: float) -> np.ndarray:
    """(T, 3, 3) element matrices: (integral of d**alpha over T) * G G^T."""
    grads = mesh.gradients()
    w = mesh_quadrature(mesh, alpha).element_weight
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        bad = int(np.flatnonzero(~np.isfinite(w) | (w <= 0.0))[0])
        raise NumericError(f"weight integral failed on triangle {bad}")
    return w[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)


def _chunk_matrix(mesh: Mesh, local: np.ndarray, ids: np.ndarray) -> sp.csr_matrix:
    tri = mesh.triangles[ids]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    V = mesh.num_vertices
    return sp.coo_matrix((local[ids].ravel(), (rows, cols)), shape=(V, V)).tocsr()


def assemble_stiffness(mesh: Mesh, alpha: float, threads: int = 1, full: bool = False) -> sp.csr_matrix:
    """
    Weighted P1 stiffness matrix.

    Triangles are split into `threads` contiguous chunks; chunk matrices are
    summed in chunk order, so results are reproducible for a fixed thread count.
    With full=False the rows and columns of Gamma_1 vertices are dropped.
    """
    local = element_stiffness(mesh, alpha)
    chunks = [c for c in np.array_split(np.arange(mesh.num_triangles), max(1, threads)) if len(c)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ids: _chunk_matrix(mesh, local, ids), chunks))
    else:
        parts = [_chunk_matrix(mesh, local, ids) for ids in chunks]
    K = parts[0]
    for part in parts[1:]:
        K = K + part
    K = K.tocsr()
    K.sum_duplicates()
    if full:
        return K
    free = mesh.free_vertices
    return K[free][:, free].tocsr()


def export_matrix_market(matrix: sp.spmatrix, path: str) -> None:
    """Debug export of an operator in matrix-market coordinate format."""
    mmwrite(path, sp.coo_matrix(matrix), comment="weighted P1 stiffness", precision=17)
    logger.info(f"Wrote operator {matrix.shape} to {path}")


class BoundaryTerm:
    """Edge Gauss quadrature of the flux nonlinearity on the Gamma_2 edges."""

    def __init__(self, mesh: Mesh, gamma: float, n_points: int = None):
        self.mesh = mesh
        self.gamma = gamma
        edges = mesh.flux_edges
        self.edges = edges
        if len(edges):
            _, self.weights = edge_rule(mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]], n_points)
            t, _ = gauss_legendre(self.weights.shape[1])
            self.phi = np.stack((1.0 - t, t), axis=1)   # (n, 2)
        else:
            self.weights = np.zeros((0, 0))
            self.phi = np.zeros((0, 2))

    def trace_values(self, u: np.ndarray) -> np.ndarray:
        """(B, n) values of the P1 trace at the edge Gauss points."""
        return u[self.edges] @ self.phi.T

    def energy(self, u: np.ndarray) -> float:
        """(gamma+1)^-1 times the integral of |u|**(gamma+1) over Gamma_2."""
        if len(self.edges) == 0:
            return 0.0
        return float(np.sum(self.weights * np.abs(self.trace_values(u)) ** (self.gamma + 1.0)) / (self.gamma + 1.0))

    def assemble(self, u: np.ndarray) -> Tuple[np.ndarray, sp.csr_matrix]:
        """Residual contribution (V,) and Jacobian contribution (V, V)."""
        V = self.mesh.num_vertices
        if len(self.edges) == 0:
            return np.zeros(V), sp.csr_matrix((V, V))
        tu = self.trace_values(u)
        mag = np.abs(tu) ** (self.gamma - 1.0)
        flux = self.weights * mag * tu                            # (B, n)
        res_local = flux @ self.phi                                # (B, 2)
        res = np.bincount(self.edges.ravel(), weights=res_local.ravel(), minlength=V)
        dflux = self.weights * self.gamma * mag                    # (B, n)
        jac_local = np.einsum("bq,qi,qj->bij", dflux, self.phi, self.phi)
        rows = np.repeat(self.edges, 2, axis=1).ravel()
        cols = np.tile(self.edges, (1, 2)).ravel()
        jac = sp.coo_matrix((jac_local.ravel(), (rows, cols)), shape=(V, V)).tocsr()
        return res, jac


def assemble_boundary_term(mesh: Mesh, gamma: float, u: np.ndarray) -> Tuple[np.ndarray, sp.csr_matrix]:
    """Residual and Jacobian contributions of the integral of |u|**(gamma-1) u phi over Gamma_2."""
    return BoundaryTerm(mesh, gamma).assemble(np.asarray(u, dtype=float))


def load_vector(mesh: Mesh, mu1n: MollifiedMeasure, mu2n: MollifiedMeasure) -> np.ndarray:
    """pair(mu2^n, phi_i) - pair(mu1^n, phi_i) for every hat function."""
    return mu2n.hat_pairing(mesh) - mu1n.hat_pairing(mesh)