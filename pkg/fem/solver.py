"""
Damped Newton solver for the regularized problems

    K u + B(u) = L_n,   L_n = pair(mu2^n, phi) - pair(mu1^n, phi),

over the P1 space vanishing on Gamma_1, with Armijo backtracking on the
convex energy J(u) = 1/2 u.Ku + (gamma+1)^-1 int |u|^(gamma+1) - L_n.u.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from config import HarnessConfig
from .assembly import BoundaryTerm, assemble_stiffness, load_vector
from .errors import ConvergenceError, DomainError, NumericError
from .measure import MollifiedMeasure, mollify
from .problem import DiscreteSolution, ProblemSpec, SolverTelemetry

logger = logging.getLogger(__name__)


def mollified_data(spec: ProblemSpec, n: int) -> Tuple[MollifiedMeasure, MollifiedMeasure]:
    mu1n = mollify(spec.mu1, n, spec.mesh, spec.profile, spec.r0)
    mu2n = mollify(spec.mu2, n, spec.mesh, spec.profile, spec.r0)
    return mu1n, mu2n


def stiffness(spec: ProblemSpec, full: bool = False) -> sp.csr_matrix:
    """Weighted stiffness operator of the problem (free rows/columns unless full)."""
    return assemble_stiffness(spec.mesh, spec.alpha, spec.threads, full=full)


class _LinearSolver:
    """Jacobi-preconditioned CG with an incomplete-factorization fallback."""

    def __init__(self, alpha: float, telemetry: SolverTelemetry):
        self.alpha = alpha
        self.telemetry = telemetry

    def solve(self, A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
        dof = A.shape[0]
        diag = A.diagonal()
        if np.any(diag <= 0.0):
            raise NumericError("Jacobian has a non-positive diagonal entry (assembly bug)")
        jacobi = spla.LinearOperator(A.shape, matvec=lambda x: x / diag)
        count = [0]

        def tick(_):
            count[0] += 1

        maxiter = HarnessConfig.CG_MAXITER_FACTOR * dof
        x, info = spla.cg(A, b, rtol=HarnessConfig.CG_RTOL, atol=0.0, maxiter=maxiter, M=jacobi, callback=tick)
        if info == 0:
            self.telemetry.linear_iterations.append(count[0])
            logger.debug(f"CG converged in {count[0]} iterations")
            return x
        if abs(self.alpha) < HarnessConfig.ILU_ALPHA_THRESHOLD:
            raise NumericError(f"CG did not converge in {maxiter} iterations (info={info})")
        logger.warning(f"⚠️ CG stalled after {count[0]} iterations; retrying with ILU preconditioner")
        self.telemetry.linear_fallbacks += 1
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, matvec=ilu.solve)
        count[0] = 0
        x, info = spla.cg(A, b, x0=x, rtol=HarnessConfig.CG_RTOL, atol=0.0, maxiter=maxiter, M=M, callback=tick)
        if info != 0:
            logger.warning("⚠️ ILU-preconditioned CG failed; using a direct factorization")
            x = spla.spsolve(A.tocsc(), b)
        self.telemetry.linear_iterations.append(count[0])
        return x


def _newton(K: sp.csr_matrix, boundary: BoundaryTerm, L: np.ndarray, free: np.ndarray,
            u0: np.ndarray, alpha: float, n: int, telemetry: SolverTelemetry) -> np.ndarray:
    V = len(L)
    u = np.zeros(V)
    u[free] = u0[free]
    Lf = L[free]
    tol = HarnessConfig.NEWTON_RTOL * (1.0 + float(np.max(np.abs(L), initial=0.0)))
    telemetry.tolerance = tol
    linear = _LinearSolver(alpha, telemetry)

    def energy(v: np.ndarray) -> float:
        vf = v[free]
        return 0.5 * float(vf @ (K @ vf)) + boundary.energy(v) - float(Lf @ vf)

    for it in range(HarnessConfig.NEWTON_MAX_ITER + 1):
        b_res, b_jac = boundary.assemble(u)
        F = K @ u[free] + b_res[free] - Lf
        res = float(np.max(np.abs(F), initial=0.0))
        telemetry.residual_history.append(res)
        logger.debug(f"Newton n={n} it={it} residual={res:.3e}")
        if res <= tol:
            telemetry.newton_iterations = it
            telemetry.final_residual = res
            return u
        if it == HarnessConfig.NEWTON_MAX_ITER:
            break
        J = (K + b_jac[free][:, free]).tocsr()
        delta = linear.solve(J, -F)

        j0 = energy(u)
        slope = float(F @ delta)
        slack = 10.0 * np.finfo(float).eps * (abs(j0) + 1.0)
        step = 1.0
        trial = u.copy()
        for _ in range(HarnessConfig.ARMIJO_MAX_HALVINGS):
            trial[free] = u[free] + step * delta
            if energy(trial) <= j0 + HarnessConfig.ARMIJO_C1 * step * slope + slack:
                break
            step *= 0.5
            telemetry.armijo_halvings += 1
        else:
            # no sufficient decrease of the convex energy along a Newton direction
            raise ConvergenceError(
                f"Armijo backtracking exhausted after {HarnessConfig.ARMIJO_MAX_HALVINGS} halvings "
                f"at n={n}, Newton iteration {it} (residual {res:.3e})",
                residual_history=telemetry.residual_history, n=n)
        u = trial
    raise ConvergenceError(
        f"Newton did not converge in {HarnessConfig.NEWTON_MAX_ITER} iterations at n={n} "
        f"(residual {telemetry.residual_history[-1]:.3e} > {tol:.3e})",
        residual_history=telemetry.residual_history, n=n)


def solve_regularized(spec: ProblemSpec, n: int, initial: Optional[np.ndarray] = None,
                      K: Optional[sp.csr_matrix] = None) -> DiscreteSolution:
    """Solve the problem with data mollified at index n (cold start from 0 unless `initial`)."""
    if n < 1:
        raise DomainError(f"mollification index must be >= 1, got {n}")
    mesh = spec.mesh
    mu1n, mu2n = mollified_data(spec, n)
    L = load_vector(mesh, mu1n, mu2n)
    K = stiffness(spec) if K is None else K
    boundary = BoundaryTerm(mesh, spec.gamma)
    telemetry = SolverTelemetry(warm_started=initial is not None)
    u0 = np.zeros(mesh.num_vertices) if initial is None else np.asarray(initial, dtype=float)
    u = _newton(K, boundary, L, mesh.free_vertices, u0, spec.alpha, n, telemetry)
    logger.info(f"Solved n={n}: {telemetry.newton_iterations} Newton iterations, "
                f"residual {telemetry.final_residual:.3e}")
    return DiscreteSolution(coefficients=u, n=n, alpha=spec.alpha, gamma=spec.gamma, mesh=mesh,
                            telemetry=telemetry, mu1n=mu1n, mu2n=mu2n)


def solve_sequence(spec: ProblemSpec, n_list: Sequence[int], warm_start: bool = True) -> List[DiscreteSolution]:
    """Solutions for increasing n, each warm-started from the previous one."""
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError(f"n_list must be strictly increasing, got {n_list}")
    K = stiffness(spec)
    solutions: List[DiscreteSolution] = []
    previous = None
    for n in n_list:
        try:
            sol = solve_regularized(spec, n, initial=previous if warm_start else None, K=K)
        except ConvergenceError as exc:
            exc.n = n
            raise
        solutions.append(sol)
        previous = sol.coefficients
    logger.info(f"Solved sequence n={n_list}: {total_newton_iterations(solutions)} Newton iterations in total")
    return solutions


def total_newton_iterations(solutions: Sequence[DiscreteSolution]) -> int:
    return int(sum(s.telemetry.newton_iterations for s in solutions))


# ------------------------------------------------------------------- checks
def weak_form_residual(spec: ProblemSpec, solution: DiscreteSolution) -> float:
    """
    max over hats phi_i vanishing on Gamma_1 of
    |int d^a grad u.grad phi_i + pair(mu1^n, phi_i) - pair(mu2^n, phi_i) + int |u|^(g-1) u phi_i|.
    """
    mesh = spec.mesh
    mu1n, mu2n = solution.mu1n, solution.mu2n
    if mu1n is None or mu2n is None:
        mu1n, mu2n = mollified_data(spec, solution.n)
    u = solution.coefficients
    b_res, _ = BoundaryTerm(mesh, spec.gamma).assemble(u)
    F = stiffness(spec, full=True) @ u + mu1n.hat_pairing(mesh) - mu2n.hat_pairing(mesh) + b_res
    return float(np.max(np.abs(F[mesh.free_vertices]), initial=0.0))


def energy_identity(spec: ProblemSpec, solution: DiscreteSolution) -> Tuple[float, float]:
    """(int d^a |grad u|^2 + int_Gamma2 |u|^(g+1), pair(mu2^n, u) - pair(mu1^n, u))."""
    mesh = spec.mesh
    mu1n, mu2n = solution.mu1n, solution.mu2n
    if mu1n is None or mu2n is None:
        mu1n, mu2n = mollified_data(spec, solution.n)
    u = solution.coefficients
    boundary = BoundaryTerm(mesh, spec.gamma)
    lhs = float(u @ (stiffness(spec, full=True) @ u)) + (spec.gamma + 1.0) * boundary.energy(u)
    rhs = float(load_vector(mesh, mu1n, mu2n) @ u)
    return lhs, rhs
