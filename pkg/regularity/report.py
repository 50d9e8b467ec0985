"""
Report containers: tidy rows, slope fits, thresholds; CSV and JSON export.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy import stats

from fem.errors import NumericError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["level", "h_max", "n", "functional", "param", "value"]
FLOAT_FORMAT = "%.12e"

BOUNDED_SLOPE = 0.05
BOUNDED_BAND = 0.15


class ReportRow(BaseModel):
    level: int
    h_max: float
    n: int
    functional: str
    param: float
    value: float


class SlopeFit(BaseModel):
    """Least-squares slope of log(value) against log(h_max)."""

    functional: str
    param: float
    slope: float
    stderr: float
    intercept: float
    points: int
    bounded: bool
    last_growth: float = Field(..., description="value ratio between the two finest levels")


def fit_slope(h: Sequence[float], values: Sequence[float], functional: str = "", param: float = 0.0,
              window: Optional[int] = None) -> SlopeFit:
    """
    Fit on the last max(3, len-1) points (or `window`). A norm is bounded when
    |slope| < 0.05 and the 2-sigma interval stays inside (-0.15, 0.15).
    """
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(h) < 3:
        raise NumericError(f"slope fit needs at least 3 levels, got {len(h)}")
    order = np.argsort(-h)
    h, v = h[order], v[order]
    window = max(3, len(h) - 1) if window is None else window
    h, v = h[-window:], v[-window:]
    growth = float(v[-1] / v[-2]) if v[-2] != 0.0 else 1.0
    if np.all(v == 0.0):
        return SlopeFit(functional=functional, param=param, slope=0.0, stderr=0.0, intercept=0.0,
                        points=len(h), bounded=True, last_growth=1.0)
    if np.any(v <= 0.0):
        raise NumericError(f"cannot fit log-slope of non-positive values for {functional}")
    fit = stats.linregress(np.log(h), np.log(v))
    slope, stderr = float(fit.slope), float(fit.stderr)
    bounded = abs(slope) < BOUNDED_SLOPE and abs(slope) + 2.0 * stderr < BOUNDED_BAND
    return SlopeFit(functional=functional, param=param, slope=slope, stderr=stderr,
                    intercept=float(fit.intercept), points=len(h), bounded=bounded, last_growth=growth)


class RegularityReport(BaseModel):
    rows: List[ReportRow] = Field(default_factory=list)
    fits: List[SlopeFit] = Field(default_factory=list)
    thresholds: Dict[str, float] = Field(default_factory=dict)
    extras: Dict[str, Any] = Field(default_factory=dict)

    def add(self, level: int, h_max: float, n: int, functional: str, param: float, value: float) -> None:
        self.rows.append(ReportRow(level=level, h_max=h_max, n=n, functional=functional,
                                   param=float(param), value=float(value)))

    def frame(self) -> pd.DataFrame:
        if not self.rows:
            return pd.DataFrame(columns=CSV_COLUMNS)
        return pd.DataFrame([r.model_dump() for r in self.rows], columns=CSV_COLUMNS)

    def series(self, functional: str, param: float) -> pd.DataFrame:
        df = self.frame()
        sel = df[(df.functional == functional) & np.isclose(df.param, param)]
        return sel.sort_values(["level", "n"])

    def fit_all(self, by: str = "h_max") -> List[SlopeFit]:
        """Fit every (functional, param) series that has at least 3 distinct levels."""
        df = self.frame()
        fits = []
        for (name, param), group in df.groupby(["functional", "param"], sort=True):
            group = group.sort_values("level")
            if group["level"].nunique() < 3:
                continue
            fits.append(fit_slope(group[by].to_numpy(), group["value"].to_numpy(), name, float(param)))
        self.fits = fits
        return fits

    def fit_for(self, functional: str, param: float) -> Optional[SlopeFit]:
        for fit in self.fits:
            if fit.functional == functional and math.isclose(fit.param, param, rel_tol=1e-12, abs_tol=1e-12):
                return fit
        return None

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Wrote {len(self.rows)} rows to {path}")
        return path

    def summary(self) -> Dict[str, Any]:
        return {
            "fits": [f.model_dump() for f in self.fits],
            "thresholds": self.thresholds,
            **self.extras,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.summary(), indent=2, default=_json_default))
        return path


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, BaseModel):
        return value.model_dump()
    return str(value)
