"""
Norms and energy functionals of P1 fields, all evaluated at quadrature level.

Every functional takes anything with `.mesh` and `.coefficients`
(a DiscreteSolution or a P1Field).
"""
import math
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from fem.assembly import BoundaryTerm
from fem.errors import DomainError
from fem.measure import MollifiedMeasure
from fem.weight import mesh_quadrature


# ------------------------------------------------------------ test functions
def phi_theta(r, theta: float) -> np.ndarray:
    """Odd primitive of (1+t)**-theta: ((1+|r|)**(1-theta) - 1)/(1-theta) * sign(r)."""
    if not theta > 1.0:
        raise DomainError(f"theta must be > 1, got {theta}")
    r = np.asarray(r, dtype=float)
    return np.sign(r) * np.expm1((1.0 - theta) * np.log1p(np.abs(r))) / (1.0 - theta)


def psi_truncation(s, t: float) -> np.ndarray:
    """Odd extension of min((s - t)^+, 1)."""
    if t < 0:
        raise DomainError(f"truncation level must be >= 0, got {t}")
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.minimum(np.maximum(np.abs(s) - t, 0.0), 1.0)


class PhiTheta(BaseModel):
    theta: float = Field(..., gt=1.0)

    @property
    def bound(self) -> float:
        return 1.0 / (self.theta - 1.0)

    def __call__(self, r):
        return phi_theta(r, self.theta)


class PsiTruncation(BaseModel):
    t: float = Field(..., ge=0.0)

    def __call__(self, s):
        return psi_truncation(s, self.t)


# ----------------------------------------------------------------- helpers
def _point_data(u, alpha: float):
    mesh = u.mesh
    rule = mesh_quadrature(mesh, alpha)
    coeffs = np.asarray(u.coefficients, dtype=float)
    values = rule.evaluate(coeffs, mesh.triangles)
    grads = np.einsum("ti,tid->td", coeffs[mesh.triangles], mesh.gradients())
    grad_sq = np.sum(grads ** 2, axis=1)[rule.triangle]
    return rule, values, grad_sq


def _check_q(q: float, lo: float = 1.0, hi: float = 2.0) -> None:
    if not lo <= q <= hi:
        raise DomainError(f"q must lie in [{lo}, {hi}], got {q}")


# -------------------------------------------------------------- functionals
def phi_theta_energy(u, theta: float, alpha: float) -> float:
    """Integral of d**alpha |grad u|**2 / (1 + |u|)**theta."""
    if not theta > 1.0:
        raise DomainError(f"theta must be > 1, got {theta}")
    rule, values, grad_sq = _point_data(u, alpha)
    return rule.integrate(grad_sq / (1.0 + np.abs(values)) ** theta)


def weighted_Lq_norm(u, q: float, alpha: float) -> float:
    """(integral of d**alpha |u|**q)**(1/q)."""
    if q < 1.0:
        raise DomainError(f"q must be >= 1, got {q}")
    rule, values, _ = _point_data(u, alpha)
    return rule.integrate(np.abs(values) ** q) ** (1.0 / q)


def weighted_gradient_Lq(u, q: float, alpha: float) -> float:
    """Integral of d**alpha |grad u|**q (no root)."""
    rule, _, grad_sq = _point_data(u, alpha)
    return rule.integrate(grad_sq ** (0.5 * q))


def weighted_W1q_norm(u, q: float, alpha: float) -> float:
    """(integral of d**alpha (|u|**q + |grad u|**q))**(1/q), q in [1, 2]."""
    _check_q(q)
    rule, values, grad_sq = _point_data(u, alpha)
    return rule.integrate(np.abs(values) ** q + grad_sq ** (0.5 * q)) ** (1.0 / q)


def boundary_Lgamma_norm(u, gamma: float) -> float:
    """(integral over Gamma_2 of |Tu|**gamma)**(1/gamma)."""
    if not gamma > 1.0:
        raise DomainError(f"gamma must be > 1, got {gamma}")
    term = BoundaryTerm(u.mesh, gamma)
    if len(term.edges) == 0:
        raise DomainError("Gamma_2 is empty")
    tu = term.trace_values(np.asarray(u.coefficients, dtype=float))
    return float(np.sum(term.weights * np.abs(tu) ** gamma)) ** (1.0 / gamma)


def holder_chain(u, q: float, theta: float, alpha: float) -> Tuple[float, float]:
    """
    Both sides of
        int d^a |grad u|^q <= E_theta^(q/2) * (int d^a (1+|u|)^(theta q/(2-q)))^((2-q)/2)
    with E_theta the phi_theta energy, for q in [1, 2).
    """
    if not 1.0 <= q < 2.0:
        raise DomainError(f"q must lie in [1, 2), got {q}")
    rule, values, grad_sq = _point_data(u, alpha)
    lhs = rule.integrate(grad_sq ** (0.5 * q))
    energy = rule.integrate(grad_sq / (1.0 + np.abs(values)) ** theta)
    growth = rule.integrate((1.0 + np.abs(values)) ** (theta * q / (2.0 - q)))
    return lhs, energy ** (0.5 * q) * growth ** (0.5 * (2.0 - q))


class PhiThetaEstimate(BaseModel):
    theta: float
    energy: float
    boundary_term: float
    lhs: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.bound * (1.0 + 1e-9)


def phi_theta_estimate(u, theta: float, gamma: float, mu1n: MollifiedMeasure,
                       mu2n: MollifiedMeasure, alpha: Optional[float] = None) -> PhiThetaEstimate:
    """
    Left side of the phi_theta test of the weak form and its data bound
    (||mu1^n||_1 + ||mu2^n||_1) * sup|phi_theta|.
    """
    alpha = u.alpha if alpha is None else alpha
    energy = phi_theta_energy(u, theta, alpha)
    term = BoundaryTerm(u.mesh, gamma)
    boundary = 0.0
    if len(term.edges):
        tu = term.trace_values(np.asarray(u.coefficients, dtype=float))
        boundary = float(np.sum(term.weights * np.abs(tu) ** (gamma - 1.0) * tu * phi_theta(tu, theta)))
    bound = (mu1n.l1_norm + mu2n.l1_norm) / (theta - 1.0)
    return PhiThetaEstimate(theta=theta, energy=energy, boundary_term=boundary,
                            lhs=energy + boundary, bound=bound)


# ---------------------------------------------------------------- level sets
class LevelSetTail(BaseModel):
    """Quantities of the equi-integrability inequality at level t."""

    t: float
    boundary_tail: float = Field(..., description="int over {|Tu| >= t+1} of |u|^gamma")
    boundary_mass_tail: float = Field(..., description="|mu2^n| over {|Tu| >= t}")
    interior_mass_tail: float = Field(..., description="|mu1^n| over {|u| >= t}")
    gradient_tail: float = Field(..., description="int over {|u| >= t} of d^a |grad u|^2")
    lebesgue_E: float = Field(..., description="Lebesgue measure of {|u| >= t}")
    constant: float = 1.0

    @property
    def rhs(self) -> float:
        return self.boundary_mass_tail + self.interior_mass_tail + self.constant * self.gradient_tail

    @property
    def inequality_holds(self) -> bool:
        return self.boundary_tail <= self.rhs * (1.0 + 1e-12) + 1e-14


def level_set_tail(u, t: float, gamma: float, mu1n: MollifiedMeasure, mu2n: MollifiedMeasure,
                   alpha: Optional[float] = None) -> LevelSetTail:
    if t < 0:
        raise DomainError(f"level t must be >= 0, got {t}")
    alpha = getattr(u, "alpha", 0.0) if alpha is None else alpha
    mesh = u.mesh
    coeffs = np.asarray(u.coefficients, dtype=float)
    rule, values, grad_sq = _point_data(u, alpha)
    in_E = np.abs(values) >= t
    gradient_tail = rule.integrate(np.where(in_E, grad_sq, 0.0))
    lebesgue = float(np.sum(rule.dx[in_E]))

    term = BoundaryTerm(mesh, gamma)
    boundary_tail = 0.0
    if len(term.edges):
        tu = term.trace_values(coeffs)
        boundary_tail = float(np.sum(np.where(np.abs(tu) >= t + 1.0, term.weights * np.abs(tu) ** gamma, 0.0)))

    boundary_mass = 0.0
    if len(mu2n.weights):
        trace = mesh.trace_at_params(coeffs, mu2n.params)
        boundary_mass = float(np.sum(np.abs(mu2n.weights)[np.abs(trace) >= t]))
    interior_mass = 0.0
    if len(mu1n.weights):
        inner = mesh.evaluate(coeffs, mu1n.points)
        interior_mass = float(np.sum(np.abs(mu1n.weights)[np.abs(inner) >= t]))
    return LevelSetTail(t=t, boundary_tail=boundary_tail, boundary_mass_tail=boundary_mass,
                        interior_mass_tail=interior_mass, gradient_tail=gradient_tail,
                        lebesgue_E=lebesgue)


# ----------------------------------------------------------------- exponents
def critical_exponent(N: int = 2) -> float:
    """Critical gradient exponent N/(N-1) for the unweighted problem."""
    return N / (N - 1.0)


def weighted_critical_exponent(N: int, delta: float) -> float:
    """(2N + 2 delta (N-1)) / (2N - 1 + delta) for the weighted problem."""
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return (2.0 * N + 2.0 * delta * (N - 1)) / (2.0 * N - 1.0 + delta)


def embedding_exponent(theta: float, k: float) -> float:
    """Gradient exponent reached through an L^{2k} embedding at level theta in (1, 2)."""
    if not 1.0 < theta < 2.0:
        raise DomainError(f"theta must lie in (1, 2), got {theta}")
    return 2.0 * (2.0 - theta) * k / (theta + k * (2.0 - theta))


def trace_order(q: float, alpha: float) -> float:
    """Fractional order 1 - (1 + alpha)/q of the boundary trace space."""
    return 1.0 - (1.0 + alpha) / q


def lebesgue_tail_bound(u, t: float, q: float, alpha: float = 0.0) -> float:
    """Chebyshev bound ||u||_q^q / t^q for the measure of {|u| >= t} (alpha = 0 gives Lebesgue)."""
    if t <= 0:
        return math.inf
    return weighted_Lq_norm(u, q, alpha) ** q / t ** q
