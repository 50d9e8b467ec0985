"""
Refinement and mollification studies.

regularity_study solves on a refinement hierarchy with n tied to the level and
tabulates weighted W^{1,q} norms (plus optional functionals); sequence_study
follows the mollification sequence on one mesh and tabulates the uniform
estimates and level-set tails.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

from pydantic import BaseModel, Field

from fem.errors import DomainError
from fem.mesh import refine
from fem.problem import DiscreteSolution, ProblemSpec
from fem.solver import solve_regularized, solve_sequence
from study_tracker import StudyStepTracker

from .embedding import EmbeddingProbe, probe_embedding
from .functionals import (boundary_Lgamma_norm, embedding_exponent, holder_chain, lebesgue_tail_bound,
                          level_set_tail, phi_theta_energy, phi_theta_estimate, critical_exponent,
                          weighted_critical_exponent, weighted_gradient_Lq, weighted_W1q_norm)
from .report import RegularityReport
from .trace import trace_gagliardo_norm

logger = logging.getLogger(__name__)

DELTA_GRID = (0.05, 0.1, 0.2)
REFINEMENT_STEPS = 5
SEQUENCE_STEPS = 3
TAIL_DECAY_FRACTION = 0.01


class NRule(BaseModel):
    """Mollification index tied to the mesh level: n = base + step * level."""

    base: int = Field(2, ge=1)
    step: int = Field(1, ge=0)

    def __call__(self, level: int) -> int:
        return self.base + self.step * level


NRuleLike = Union[NRule, Mapping[int, int], Callable[[int], int]]


def _resolve_n(n_rule: NRuleLike, level: int) -> int:
    if isinstance(n_rule, Mapping):
        return int(n_rule[level])
    return int(n_rule(level))


def threshold_table(N: int = 2, deltas: Sequence[float] = DELTA_GRID, theta: float = 1.01,
                    embedding: Optional[EmbeddingProbe] = None) -> Dict[str, float]:
    """
    Critical exponents used by the reports. Neither the delta grid nor the
    delta estimated by the embedding ladder is certified.
    """
    table = {"unweighted": critical_exponent(N)}
    for delta in deltas:
        table[f"weighted_delta_{delta:g}"] = weighted_critical_exponent(N, delta)
        table[f"embedding_theta_{theta:g}_delta_{delta:g}"] = embedding_exponent(theta, critical_exponent(N) + delta)
    if embedding is not None:
        table[f"estimated_k_max_alpha_{embedding.alpha:g}"] = embedding.k_max
        if embedding.delta_estimate > 0:
            table[f"weighted_estimated_delta_alpha_{embedding.alpha:g}"] = weighted_critical_exponent(
                N, embedding.delta_estimate)
    return table


def _level_rows(report: RegularityReport, level: int, sol: DiscreteSolution, q_grid, theta_grid,
                trace_q_grid, alpha: float, gamma: float) -> None:
    h = sol.mesh.h_max
    n = sol.n
    for q in q_grid:
        if q <= 2.0:
            report.add(level, h, n, "W1q", q, weighted_W1q_norm(sol, q, alpha))
        report.add(level, h, n, "grad_Lq", q, weighted_gradient_Lq(sol, q, alpha))
    report.add(level, h, n, "dirichlet_energy", 2.0, weighted_gradient_Lq(sol, 2.0, alpha))
    for theta in theta_grid:
        report.add(level, h, n, "phi_theta_energy", theta, phi_theta_energy(sol, theta, alpha))
    if sol.mesh.has_flux_boundary:
        report.add(level, h, n, "boundary_Lgamma", gamma, boundary_Lgamma_norm(sol, gamma))
    for q in trace_q_grid:
        report.add(level, h, n, "trace_gagliardo", q, trace_gagliardo_norm(sol, q, alpha))


def regularity_study(spec: ProblemSpec, levels: int, q_grid: Sequence[float], n_rule: NRuleLike,
                     theta_grid: Sequence[float] = (), trace_q_grid: Sequence[float] = (),
                     threads: int = 1, tracker: Optional[StudyStepTracker] = None) -> RegularityReport:
    """
    Solve on `levels` uniformly refined meshes (level 0 is spec.mesh) and fit
    log(norm) against log(h_max) for every tabulated functional. The weighted
    embedding is estimated on the finest mesh and joins the threshold table.
    """
    if levels < 3:
        raise DomainError(f"a regularity study needs at least 3 levels, got {levels}")
    tracker = tracker or StudyStepTracker("regularity_study")
    tracker.set_total_steps(tracker.total_steps + REFINEMENT_STEPS)
    meshes = [spec.mesh]
    with tracker.step("mesh_hierarchy", f"refining {levels - 1} times") as out:
        for _ in range(levels - 1):
            meshes.append(refine(meshes[-1]))
        out["message"] = f"finest mesh has {meshes[-1].num_vertices} vertices"

    def run(level: int) -> DiscreteSolution:
        n = _resolve_n(n_rule, level)
        logger.info(f"Study level {level}: h_max={meshes[level].h_max:.4g}, n={n}")
        return solve_regularized(spec.with_mesh(meshes[level]), n)

    with tracker.step("solves", f"solving {levels} levels") as out:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                solutions = list(pool.map(run, range(levels)))
        else:
            solutions = [run(level) for level in range(levels)]
        out["newton_iterations"] = [s.telemetry.newton_iterations for s in solutions]

    with tracker.step("embedding", "weighted embedding on the finest mesh") as out:
        try:
            embedding = probe_embedding(spec.alpha, meshes[-1])
            out["message"] = f"k_max = {embedding.k_max:g}"
        except DomainError as e:
            logger.warning(f"⚠️ Embedding estimate skipped: {e}")
            embedding = None
            out["message"] = "skipped, finest mesh too coarse"

    report = RegularityReport(thresholds=threshold_table(embedding=embedding))
    with tracker.step("functionals", "tabulating norms"):
        for level, sol in enumerate(solutions):
            _level_rows(report, level, sol, q_grid, theta_grid, trace_q_grid, spec.alpha, spec.gamma)
    with tracker.step("fits", "fitting log-log slopes") as out:
        fits = report.fit_all()
        out["bounded"] = {f"{f.functional}:{f.param:g}": f.bounded for f in fits}
    report.extras["newton_iterations"] = [s.telemetry.newton_iterations for s in solutions]
    report.extras["h_max"] = [m.h_max for m in meshes]
    report.extras["n"] = [s.n for s in solutions]
    report.extras["embedding"] = embedding.model_dump() if embedding is not None else None
    return report


def _boundary_tail_decay(report: RegularityReport, t_grid: Sequence[float]) -> Optional[float]:
    """sup_n tail(t_max) / min_n tail(0), or None when the tail at level 0 is empty for some n."""
    if 0.0 not in t_grid or len(t_grid) < 2:
        return None
    start = report.series("boundary_tail", 0.0)["value"].to_numpy()
    end = report.series("boundary_tail", max(t_grid))["value"].to_numpy()
    if not len(start) or start.min() <= 0.0:
        logger.warning("⚠️ boundary tail is empty at t = 0; |Tu| stays below 1 on Gamma_2")
        return None
    return float(end.max() / start.min())


def sequence_study(spec: ProblemSpec, n_list: Sequence[int], theta: float = 1.5,
                   t_grid: Sequence[float] = (0.0, 0.5, 1.0, 2.0), holder_q: Sequence[float] = (1.2, 1.5),
                   tracker: Optional[StudyStepTracker] = None) -> RegularityReport:
    """
    Follow u_n along the mollification sequence on spec.mesh: the phi_theta
    energy, the L^gamma(Gamma_2) norm, the Hölder chain and the level-set tails.
    """
    tracker = tracker or StudyStepTracker("sequence_study")
    tracker.set_total_steps(tracker.total_steps + SEQUENCE_STEPS)
    with tracker.step("solve_sequence", f"n = {list(n_list)}"):
        solutions = solve_sequence(spec, n_list)
    report = RegularityReport(thresholds=threshold_table())
    holder: List[Dict[str, float]] = []
    tails_ok = True
    with tracker.step("functionals", "tabulating estimates"):
        for sol in solutions:
            h, n = sol.mesh.h_max, sol.n
            report.add(0, h, n, "phi_theta_energy", theta, phi_theta_energy(sol, theta, spec.alpha))
            est = phi_theta_estimate(sol, theta, spec.gamma, sol.mu1n, sol.mu2n, spec.alpha)
            report.add(0, h, n, "phi_theta_lhs", theta, est.lhs)
            report.add(0, h, n, "phi_theta_bound", theta, est.bound)
            if sol.mesh.has_flux_boundary:
                report.add(0, h, n, "boundary_Lgamma", spec.gamma, boundary_Lgamma_norm(sol, spec.gamma))
            for q in holder_q:
                lhs, rhs = holder_chain(sol, q, theta, spec.alpha)
                holder.append({"n": n, "q": q, "lhs": lhs, "rhs": rhs})
            for t in t_grid:
                tail = level_set_tail(sol, t, spec.gamma, sol.mu1n, sol.mu2n, spec.alpha)
                tails_ok = tails_ok and tail.inequality_holds
                report.add(0, h, n, "boundary_tail", t, tail.boundary_tail)
                report.add(0, h, n, "boundary_mass_tail", t, tail.boundary_mass_tail)
                report.add(0, h, n, "interior_mass_tail", t, tail.interior_mass_tail)
                report.add(0, h, n, "gradient_tail", t, tail.gradient_tail)
                report.add(0, h, n, "lebesgue_E", t, tail.lebesgue_E)
                if t > 0.0:
                    report.add(0, h, n, "lebesgue_bound", t, lebesgue_tail_bound(sol, t, 2.0))
    with tracker.step("tail_decay", "boundary tail at t_max against t = 0") as out:
        decay = _boundary_tail_decay(report, t_grid)
        out["message"] = "no tail at t = 0" if decay is None else f"sup tail(t_max)/tail(0) = {decay:.3e}"
    report.extras["holder_chain"] = holder
    report.extras["tail_inequality_holds"] = tails_ok
    report.extras["boundary_tail_decay"] = decay
    report.extras["boundary_tail_decays"] = decay is not None and decay <= TAIL_DECAY_FRACTION
    report.extras["newton_iterations"] = [s.telemetry.newton_iterations for s in solutions]
    return report
