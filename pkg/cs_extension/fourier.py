"""
Finite Fourier series on the periodic interval [0, 2*pi) and the spectral
fractional Laplacian acting on them.
"""
import math
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field

from fem.errors import DomainError


class FourierMode(BaseModel):
    k: int = Field(..., ge=0)
    cos: float = 0.0
    sin: float = 0.0


class FourierSeries(BaseModel):
    """v(y) = sum_k cos_k cos(k y) + sin_k sin(k y)."""

    modes: List[FourierMode] = Field(default_factory=list)

    @classmethod
    def cosine(cls, k: int, amplitude: float = 1.0) -> "FourierSeries":
        return cls(modes=[FourierMode(k=k, cos=amplitude)])

    @classmethod
    def sine(cls, k: int, amplitude: float = 1.0) -> "FourierSeries":
        return cls(modes=[FourierMode(k=k, sin=amplitude)])

    def combined(self) -> Dict[int, FourierMode]:
        out: Dict[int, FourierMode] = {}
        for m in self.modes:
            prev = out.get(m.k, FourierMode(k=m.k))
            out[m.k] = FourierMode(k=m.k, cos=prev.cos + m.cos, sin=prev.sin + m.sin)
        return out

    @property
    def active_modes(self) -> List[int]:
        return sorted(k for k, m in self.combined().items() if m.cos != 0.0 or m.sin != 0.0)

    @property
    def max_mode(self) -> int:
        active = self.active_modes
        return active[-1] if active else 0

    def __add__(self, other: "FourierSeries") -> "FourierSeries":
        return FourierSeries(modes=self.modes + other.modes)

    def scaled(self, c: float) -> "FourierSeries":
        return FourierSeries(modes=[FourierMode(k=m.k, cos=c * m.cos, sin=c * m.sin) for m in self.modes])

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for k, m in self.combined().items():
            out = out + m.cos * np.cos(k * y) + m.sin * np.sin(k * y)
        return out


def lateral_grid(n_y: int) -> np.ndarray:
    return 2.0 * math.pi * np.arange(n_y) / n_y


def spectral_fractional(v: FourierSeries, s: float) -> FourierSeries:
    """Apply the Fourier multiplier |k|^(2s) mode by mode."""
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    out = []
    for k, m in v.combined().items():
        factor = 0.0 if k == 0 else float(k) ** (2.0 * s)
        out.append(FourierMode(k=k, cos=factor * m.cos, sin=factor * m.sin))
    return FourierSeries(modes=out)
