"""Regularity functionals, trace seminorms, embedding estimate and refinement studies."""
from .embedding import EmbeddingProbe, default_trial_family, embedding_delta_probe, embedding_ratio, probe_embedding
from .functionals import (LevelSetTail, PhiTheta, PhiThetaEstimate, PsiTruncation, boundary_Lgamma_norm,
                          embedding_exponent, holder_chain, level_set_tail, phi_theta, phi_theta_energy,
                          phi_theta_estimate, psi_truncation, critical_exponent, weighted_critical_exponent,
                          trace_order, weighted_gradient_Lq, weighted_Lq_norm, weighted_W1q_norm)
from .report import RegularityReport, ReportRow, SlopeFit, fit_slope
from .study import NRule, regularity_study, sequence_study, threshold_table
from .trace import trace_gagliardo_norm, trace_gagliardo_seminorm, trace_Lq_norm

__all__ = [
    'PhiTheta', 'PsiTruncation', 'phi_theta', 'psi_truncation',
    'phi_theta_energy', 'phi_theta_estimate', 'PhiThetaEstimate',
    'weighted_W1q_norm', 'weighted_Lq_norm', 'weighted_gradient_Lq', 'boundary_Lgamma_norm', 'holder_chain',
    'level_set_tail', 'LevelSetTail',
    'critical_exponent', 'weighted_critical_exponent', 'embedding_exponent', 'trace_order',
    'trace_gagliardo_norm', 'trace_gagliardo_seminorm', 'trace_Lq_norm',
    'embedding_delta_probe', 'probe_embedding', 'embedding_ratio', 'default_trial_family', 'EmbeddingProbe',
    'regularity_study', 'sequence_study', 'NRule', 'threshold_table',
    'RegularityReport', 'ReportRow', 'SlopeFit', 'fit_slope',
]
