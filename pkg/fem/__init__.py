"""Finite-element core: domains, meshes, weighted quadrature, measures and the Newton solver."""
from .assembly import assemble_boundary_term, assemble_stiffness, export_matrix_market, load_vector
from .domain import DIRICHLET, FLUX, BoundaryPartitionRule, Domain
from .errors import (ConfigError, ConvergenceError, DomainError, HarnessError, MeshResourceError,
                     MeshValidationError, NumericError)
from .measure import Atom, BumpProfile, MeasureData, MollifiedMeasure, mollify, pair, total_variation, weakstar_gap
from .mesh import Mesh, distance_to_boundary, generate_disk_mesh, generate_square_mesh, refine
from .problem import DiscreteSolution, P1Field, ProblemSpec, SolverTelemetry
from .solver import energy_identity, solve_regularized, solve_sequence, weak_form_residual
from .weight import A2Report, WeightSpec, a2_constant_estimate, element_quadrature, mesh_quadrature, weight_value

__all__ = [
    'Domain', 'BoundaryPartitionRule', 'DIRICHLET', 'FLUX',
    'Mesh', 'generate_disk_mesh', 'generate_square_mesh', 'refine', 'distance_to_boundary',
    'WeightSpec', 'A2Report', 'weight_value', 'element_quadrature', 'mesh_quadrature', 'a2_constant_estimate',
    'Atom', 'MeasureData', 'MollifiedMeasure', 'BumpProfile', 'mollify', 'pair', 'weakstar_gap', 'total_variation',
    'ProblemSpec', 'DiscreteSolution', 'P1Field', 'SolverTelemetry',
    'assemble_stiffness', 'assemble_boundary_term', 'load_vector', 'export_matrix_market',
    'solve_regularized', 'solve_sequence', 'weak_form_residual', 'energy_identity',
    'HarnessError', 'DomainError', 'MeshValidationError', 'MeshResourceError', 'ConfigError',
    'NumericError', 'ConvergenceError',
]
