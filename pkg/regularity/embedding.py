"""
Empirical estimate of the weighted embedding ||u||_{L^2k(w)} <= C ||grad u||_{L^2(w)}.

The trial family is a ladder of bumps of radius eps sitting at distance 2 eps
from the boundary. Near the boundary w ~ eps^alpha on such a bump, so the
ratio scales like eps^((alpha + 2)/(2k) - alpha/2): it stays bounded along the
ladder exactly while k <= (alpha + 2)/alpha, and for alpha <= 0 it never grows.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from fem.domain import Domain
from fem.errors import DomainError
from fem.mesh import Mesh
from fem.problem import P1Field

from .functionals import critical_exponent, weighted_gradient_Lq, weighted_Lq_norm

logger = logging.getLogger(__name__)

TrialField = Callable[[np.ndarray], np.ndarray]
ScaledTrialField = Tuple[float, TrialField]

DEFAULT_K_GRID = tuple(np.round(np.arange(1.0, 8.01, 0.25), 2))
DEFAULT_GROWTH_CAP = 1.1
LARGEST_SCALE = 0.2
CELLS_PER_SCALE = 3.0


def boundary_bump(domain: Domain, eps: float) -> TrialField:
    """Quartic bump of radius eps centred 2 eps inside the boundary (right of the disk, bottom of the square)."""
    if domain.kind == "disk":
        center = np.array([domain.radius - 2.0 * eps, 0.0])
    else:
        center = np.array([0.5, 2.0 * eps])
    return lambda p: np.clip(1.0 - np.sum((np.atleast_2d(p) - center) ** 2, axis=1) / eps ** 2, 0.0, None) ** 2


def default_trial_family(domain: Domain, h_max: Optional[float] = None) -> List[ScaledTrialField]:
    """
    Bumps at scales LARGEST_SCALE * 2**-j, down to CELLS_PER_SCALE mesh cells
    when h_max is given (four scales otherwise).
    """
    size = domain.radius if domain.kind == "disk" else 1.0
    scales = [LARGEST_SCALE * size * 2.0 ** (-j) for j in range(4)]
    if h_max is not None:
        scales = [eps for eps in scales if eps >= CELLS_PER_SCALE * h_max]
    if len(scales) < 2:
        raise DomainError(f"mesh with h_max={h_max:.4g} cannot resolve two bump scales; "
                          f"need h_max <= {LARGEST_SCALE * size / (2.0 * CELLS_PER_SCALE):.4g}")
    return [(eps, boundary_bump(domain, eps)) for eps in scales]


def embedding_ratio(u, k: float, alpha: float) -> float:
    """||u||_{L^{2k}, w} / ||grad u||_{L^2, w} (0 for the zero field)."""
    grad = weighted_gradient_Lq(u, 2.0, alpha) ** 0.5
    if grad == 0.0:
        return 0.0
    return weighted_Lq_norm(u, 2.0 * k, alpha) / grad


class EmbeddingProbe(BaseModel):
    alpha: float
    k_grid: List[float]
    scales: List[float]
    ratios: List[List[float]]
    growth: List[float]
    cap: float
    k_max: float

    @property
    def delta_estimate(self) -> float:
        """k_max - N/(N-1): an empirical, non-certified lower estimate of delta."""
        return self.k_max - critical_exponent(2)

    @property
    def grid_capped(self) -> bool:
        """True when no grid point exceeded the cap, i.e. k_max is only the end of the grid."""
        return self.k_max == self.k_grid[-1]


def probe_embedding(alpha: float, mesh: Mesh, trial_fields: Optional[Sequence[ScaledTrialField]] = None,
                    k_grid: Sequence[float] = DEFAULT_K_GRID,
                    growth_cap: float = DEFAULT_GROWTH_CAP) -> EmbeddingProbe:
    """
    Ratios over the (scale, field) family for each k. The growth at k is the
    largest ratio along the family divided by the ratio of the largest-scale
    field; k_max ends the longest prefix of the grid whose growth stays below
    growth_cap.
    """
    family = list(trial_fields) if trial_fields is not None else default_trial_family(mesh.domain, mesh.h_max)
    if len(family) < 2:
        raise DomainError("embedding estimate needs at least two trial fields at distinct scales")
    if growth_cap <= 1.0:
        raise DomainError(f"growth cap must exceed 1, got {growth_cap}")
    grid = sorted(float(k) for k in k_grid)
    if not grid or grid[0] < 1.0:
        raise DomainError("k grid must be nonempty with k >= 1")
    family.sort(key=lambda pair: -pair[0])
    scales = [float(eps) for eps, _ in family]
    fields = [P1Field.interpolate(mesh, f) for _, f in family]
    grads = [weighted_gradient_Lq(u, 2.0, alpha) ** 0.5 for u in fields]
    if not all(g > 0.0 for g in grads):
        raise DomainError("every trial field must have a nonzero weighted gradient on this mesh")
    # unit weighted gradient, so the ratio is the L^2k norm itself
    fields = [u.scaled(1.0 / g) for u, g in zip(fields, grads)]

    ratios, growth = [], []
    for k in grid:
        row = [weighted_Lq_norm(u, 2.0 * k, alpha) for u in fields]
        ratios.append(row)
        growth.append(max(row) / row[0])
    k_max = grid[0]
    for k, g in zip(grid, growth):
        if g > growth_cap:
            break
        k_max = k
    logger.info(f"Embedding estimate alpha={alpha}: k_max={k_max} over scales {[f'{s:.3g}' for s in scales]}")
    return EmbeddingProbe(alpha=alpha, k_grid=grid, scales=scales, ratios=ratios, growth=growth,
                          cap=growth_cap, k_max=k_max)


def embedding_delta_probe(alpha: float, mesh: Mesh, trial_fields: Optional[Sequence[ScaledTrialField]] = None,
                          k_grid: Sequence[float] = DEFAULT_K_GRID) -> float:
    """Largest k in the grid for which the ratio stays below the growth cap across the family."""
    return probe_embedding(alpha, mesh, trial_fields, k_grid).k_max
