"""
Compare the discrete Dirichlet-to-Neumann map with the |k|^(2s) symbol.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fem.errors import DomainError

from .extension import ExtensionProblem, dtn_apply, with_data
from .fourier import FourierSeries, lateral_grid

logger = logging.getLogger(__name__)

CS_COLUMNS = ["s", "k", "n_x", "n_y", "H", "fitted_c", "rel_error"]


def _dtn_of_mode(base: ExtensionProblem, k: int) -> Tuple[np.ndarray, np.ndarray]:
    target = float(k) ** (2.0 * base.s) * np.cos(k * lateral_grid(base.n_y))
    return dtn_apply(with_data(base, FourierSeries.cosine(k))), target


def fit_symbol_constant(dtns: Sequence[np.ndarray], targets: Sequence[np.ndarray]) -> float:
    """Least-squares c minimizing sum_k ||f_k - c |k|^(2s) v_k||^2."""
    num = sum(float(np.dot(f, t)) for f, t in zip(dtns, targets))
    den = sum(float(np.dot(t, t)) for t in targets)
    return num / den


def mode_residual(dtn: np.ndarray, target: np.ndarray, c: float) -> float:
    """||f_k - c |k|^(2s) v_k|| / || |k|^(2s) v_k ||, so a poor c shows up instead of cancelling."""
    return float(np.linalg.norm(dtn - c * target) / np.linalg.norm(target))


def symbol_report(s_list: Sequence[float], k_list: Sequence[int], resolutions: Sequence[Tuple[int, int]],
                  strip_height: Optional[float] = None, threads: int = 1) -> pd.DataFrame:
    """
    One row per (s, resolution, k): the constant c fitted across k for that
    (s, resolution) and the relative residual of mode k about c |k|^(2s).
    """
    if not s_list or not k_list or not resolutions:
        raise DomainError("symbol report needs nonempty s, k and resolution grids")
    if min(k_list) < 1:
        raise DomainError("modes must be >= 1")
    H = strip_height if strip_height is not None else 8.0 / min(k_list)
    cells = [(s, n_x, n_y, k) for s in s_list for (n_x, n_y) in resolutions for k in k_list]

    def run(cell):
        s, n_x, n_y, k = cell
        base = ExtensionProblem(s=s, boundary_data=FourierSeries(modes=[]), strip_height=H, n_x=n_x, n_y=n_y)
        return _dtn_of_mode(base, k)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(cell) for cell in cells]

    rows: List[dict] = []
    per_group = len(k_list)
    for g in range(0, len(cells), per_group):
        group = cells[g:g + per_group]
        dtns = [r[0] for r in results[g:g + per_group]]
        targets = [r[1] for r in results[g:g + per_group]]
        c = fit_symbol_constant(dtns, targets)
        for (s, n_x, n_y, k), f, t in zip(group, dtns, targets):
            rel = mode_residual(f, t, c)
            rows.append({"s": s, "k": k, "n_x": n_x, "n_y": n_y, "H": H, "fitted_c": c, "rel_error": rel})
        logger.info(f"s={group[0][0]} n_x={group[0][1]} n_y={group[0][2]}: fitted c={c:.6f}")
    return pd.DataFrame(rows, columns=CS_COLUMNS)
