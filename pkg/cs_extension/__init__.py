"""Weighted extension, Dirichlet-to-Neumann map and fractional symbol checks."""
from .extension import (ExtensionField, ExtensionProblem, dtn_apply, extend, extension_energy, lateral_inner,
                        with_data)
from .fourier import FourierMode, FourierSeries, lateral_grid, spectral_fractional
from .symbol_report import CS_COLUMNS, fit_symbol_constant, mode_residual, symbol_report

__all__ = [
    'ExtensionProblem', 'ExtensionField', 'extend', 'dtn_apply', 'extension_energy', 'lateral_inner', 'with_data',
    'FourierMode', 'FourierSeries', 'lateral_grid', 'spectral_fractional',
    'symbol_report', 'fit_symbol_constant', 'mode_residual', 'CS_COLUMNS',
]
