import math
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from pydantic import ValidationError

import main
from config import HarnessConfig
from config.experiment_config import load_experiment_config
from fem import weight
from fem.assembly import BoundaryTerm, assemble_boundary_term, assemble_stiffness, export_matrix_market
from fem.domain import BoundaryPartitionRule
from fem.errors import ConvergenceError, DomainError, NumericError
from fem.measure import MeasureData
from fem.mesh import generate_disk_mesh
from fem.problem import DiscreteSolution, ProblemSpec, SolverTelemetry
from fem.solver import (_LinearSolver, energy_identity, solve_regularized, solve_sequence, total_newton_iterations,
                        weak_form_residual)
from tests.conftest import UPPER_ARC

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SQUARE_SPLIT = BoundaryPartitionRule(kind="axis-split", offset=0.5)


def _spd(n=6):
    diag = np.full(n, 4.0)
    off = np.full(n - 1, -1.0)
    return sp.diags([off, diag, off], [-1, 0, 1]).tocsr()


@pytest.mark.unit
def test_problem_rejects_gamma_at_most_one(disk_mesh):
    with pytest.raises(ValidationError, match="greater than 1"):
        ProblemSpec(gamma=0.5, mesh=disk_mesh)


@pytest.mark.unit
def test_problem_rejects_flux_data_without_gamma2(disk_mesh):
    with pytest.raises(ValidationError):
        ProblemSpec(gamma=2.0, mesh=disk_mesh, mu2=MeasureData.dirac((0.0, 1.0), support="gamma2"))


@pytest.mark.unit
def test_solution_must_vanish_on_gamma1(disk_mesh):
    values = np.ones(disk_mesh.num_vertices)
    with pytest.raises(ValidationError):
        DiscreteSolution(coefficients=values, n=1, alpha=0.0, gamma=2.0, mesh=disk_mesh)
    sol = DiscreteSolution.from_values(disk_mesh, values)
    assert np.all(sol.coefficients[disk_mesh.dirichlet_vertex_mask] == 0.0)


@pytest.mark.unit
def test_stiffness_annihilates_constants(disk_mesh):
    K = assemble_stiffness(disk_mesh, 0.0, full=True)
    assert np.allclose(K @ np.ones(disk_mesh.num_vertices), 0.0, atol=1e-12)
    assert abs(K - K.T).max() < 1e-14


@pytest.mark.unit
def test_threaded_assembly_is_reproducible(split_disk_mesh):
    a = assemble_stiffness(split_disk_mesh, 0.5, threads=3)
    b = assemble_stiffness(split_disk_mesh, 0.5, threads=3)
    serial = assemble_stiffness(split_disk_mesh, 0.5, threads=1)
    assert np.array_equal(a.toarray(), b.toarray())
    assert np.allclose(a.toarray(), serial.toarray(), rtol=0, atol=1e-13)


@pytest.mark.unit
def test_matrix_market_export(disk_mesh, tmp_path):
    path = tmp_path / "K.mtx"
    export_matrix_market(assemble_stiffness(disk_mesh, 0.0), str(path))
    assert path.read_text().startswith("%%MatrixMarket matrix coordinate real")


@pytest.mark.unit
def test_boundary_term_matches_energy_derivative(split_disk_mesh):
    term = BoundaryTerm(split_disk_mesh, 3.0)
    rng = np.random.default_rng(0)
    u = rng.normal(size=split_disk_mesh.num_vertices)
    res, jac = term.assemble(u)
    v = rng.normal(size=u.shape)
    eps = 1e-6
    fd = (term.energy(u + eps * v) - term.energy(u - eps * v)) / (2 * eps)
    assert res @ v == pytest.approx(fd, rel=1e-6)
    fd_jac = (term.assemble(u + eps * v)[0] - term.assemble(u - eps * v)[0]) / (2 * eps)
    assert np.allclose(jac @ v, fd_jac, rtol=1e-5, atol=1e-8)


@pytest.mark.unit
def test_boundary_term_only_touches_gamma2(split_disk_mesh, disk_mesh):
    u = np.linspace(-1.0, 1.0, split_disk_mesh.num_vertices)
    res, jac = assemble_boundary_term(split_disk_mesh, 2.5, u)
    ref_res, ref_jac = BoundaryTerm(split_disk_mesh, 2.5).assemble(u)
    assert np.array_equal(res, ref_res)
    assert abs(jac - ref_jac).max() == 0.0
    assert np.all(res[~split_disk_mesh.boundary_vertex_mask] == 0.0)
    full_res, full_jac = assemble_boundary_term(disk_mesh, 2.5, np.ones(disk_mesh.num_vertices))
    assert np.all(full_res == 0.0) and full_jac.nnz == 0


@pytest.mark.unit
def test_linear_solver_counts_iterations():
    telemetry = SolverTelemetry()
    A = _spd()
    b = np.arange(6, dtype=float)
    x = _LinearSolver(0.0, telemetry).solve(A, b)
    assert np.allclose(A @ x, b)
    assert telemetry.linear_iterations and telemetry.linear_iterations[0] > 0


@pytest.mark.unit
def test_linear_solver_failure_small_alpha(mocker):
    mocker.patch("fem.solver.spla.cg", return_value=(np.zeros(6), 60))
    with pytest.raises(NumericError):
        _LinearSolver(0.2, SolverTelemetry()).solve(_spd(), np.ones(6))


@pytest.mark.unit
def test_linear_solver_falls_back_for_strong_degeneracy(mocker):
    mocker.patch("fem.solver.spla.cg", return_value=(np.zeros(6), 60))
    telemetry = SolverTelemetry()
    x = _LinearSolver(0.7, telemetry).solve(_spd(), np.ones(6))
    assert np.allclose(_spd() @ x, np.ones(6))
    assert telemetry.linear_fallbacks == 1


@pytest.mark.integration
def test_zero_data_gives_zero_solution(split_disk_mesh):
    spec = ProblemSpec(gamma=3.0, alpha=0.5, mesh=split_disk_mesh)
    sol = solve_regularized(spec, 4)
    assert np.all(sol.coefficients == 0.0)
    assert sol.telemetry.newton_iterations == 0
    assert [s.telemetry.newton_iterations for s in solve_sequence(spec, [1, 2, 3])] == [0, 0, 0]


@pytest.mark.integration
@pytest.mark.parametrize("alpha", [0.0, 0.5, -0.5])
def test_mixed_problem_converges_with_small_residual(mixed_problem, alpha):
    spec = mixed_problem.model_copy(update={"alpha": alpha})
    sol = solve_regularized(spec, 4)
    assert sol.telemetry.newton_iterations <= 25
    assert weak_form_residual(spec, sol) <= 1e-9
    lhs, rhs = energy_identity(spec, sol)
    assert lhs == pytest.approx(rhs, rel=1e-6)
    assert np.all(sol.coefficients[spec.mesh.dirichlet_vertex_mask] == 0.0)


@pytest.mark.integration
def test_solution_json_keys(mixed_problem):
    doc = solve_regularized(mixed_problem, 2).to_dict()
    assert set(doc) == {"mesh_ref", "coefficients", "n", "alpha", "gamma", "telemetry"}
    assert doc["n"] == 2
    assert doc["telemetry"]["residual_history"][-1] <= doc["telemetry"]["tolerance"]


@pytest.mark.integration
def test_warm_start_saves_newton_iterations(mixed_problem):
    n_list = [2, 3, 4, 5]
    warm = solve_sequence(mixed_problem, n_list, warm_start=True)
    cold = solve_sequence(mixed_problem, n_list, warm_start=False)
    assert total_newton_iterations(warm) < total_newton_iterations(cold)
    for w, c in zip(warm, cold):
        assert np.allclose(w.coefficients, c.coefficients, atol=1e-8)
    assert warm[1].telemetry.warm_started and not cold[1].telemetry.warm_started


@pytest.mark.unit
def test_sequence_requires_increasing_indices(mixed_problem):
    with pytest.raises(DomainError):
        solve_sequence(mixed_problem, [3, 3, 4])


@pytest.mark.integration
def test_newton_budget_exhaustion_reports_index(mixed_problem, monkeypatch):
    monkeypatch.setattr(HarnessConfig, "NEWTON_MAX_ITER", 1)
    with pytest.raises(ConvergenceError) as info:
        solve_sequence(mixed_problem, [3])
    assert info.value.n == 3
    assert len(info.value.residual_history) == 2


@pytest.mark.integration
def test_exhausted_line_search_raises(mixed_problem, monkeypatch):
    monkeypatch.setattr(HarnessConfig, "ARMIJO_MAX_HALVINGS", 0)
    with pytest.raises(ConvergenceError, match="Armijo backtracking exhausted") as info:
        solve_regularized(mixed_problem, 3)
    assert info.value.n == 3
    assert len(info.value.residual_history) == 1 and info.value.residual_history[0] > 0.0


@pytest.mark.integration
def test_cauchy_differences_decrease(dirac_problem):
    sols = solve_sequence(dirac_problem, [1, 2, 3, 4, 5])
    diffs = [np.linalg.norm(b.coefficients - a.coefficients) for a, b in zip(sols, sols[1:])]
    assert all(later < earlier for earlier, later in zip(diffs, diffs[1:]))


@pytest.mark.slow
def test_green_function_oracle():
    mesh = generate_disk_mesh(1.0, 0.05)
    spec = ProblemSpec(gamma=2.0, alpha=0.0, mesh=mesh, mu1=MeasureData.dirac((0.0, 0.0), -1.0))
    sol = solve_regularized(spec, 10)
    r = np.hypot(*mesh.vertices.T)
    far = r > 0.3
    exact = -np.log(r[far]) / (2.0 * math.pi)
    err = np.linalg.norm(sol.coefficients[far] - exact) / np.linalg.norm(exact)
    assert err <= 0.02


def _flux_square(scale, mesh):
    # Gamma_2 is the upper half of the square boundary, Dirichlet below
    return ProblemSpec(gamma=3.0, alpha=0.0, mesh=mesh,
                       mu2=MeasureData(density="one", scale=scale, support="gamma2"),
                       partition=SQUARE_SPLIT)


@pytest.mark.integration
def test_doubling_boundary_data_raises_the_solution(square_mesh):
    low = solve_regularized(_flux_square(1.0, square_mesh), 2).coefficients
    high = solve_regularized(_flux_square(2.0, square_mesh), 2).coefficients
    assert np.all(low >= -1e-10)
    assert np.all(high - low >= -1e-10)
    assert np.max(high - low) > 0.0


@pytest.mark.integration
def test_cubic_boundary_balance(square_mesh):
    top = square_mesh.vertices[:, 1] == 1.0
    base = solve_regularized(_flux_square(200.0, square_mesh), 2).coefficients[top]
    eight = solve_regularized(_flux_square(1600.0, square_mesh), 2).coefficients[top]
    # |u|^2 u ~ g on Gamma_2 once the boundary term dominates the flux
    assert np.mean(eight) / np.mean(base) == pytest.approx(2.0, rel=0.2)


@pytest.mark.integration
def test_unweighted_shortcut_matches_general_rule(monkeypatch):
    shortcut = generate_disk_mesh(1.0, 0.2, UPPER_ARC)
    general = generate_disk_mesh(1.0, 0.2, UPPER_ARC)
    K0 = assemble_stiffness(shortcut, 0.0, full=True)
    classify = weight._classify
    # classify by boundary distance even though alpha is 0
    monkeypatch.setattr(weight, "_classify", lambda domain, corners, alpha: classify(domain, corners, 1e-300))
    kinds, _ = weight._classify(general.domain, general.vertices[general.triangles], 0.0)
    assert np.any(kinds != weight.INTERIOR)
    K1 = assemble_stiffness(general, 0.0, full=True)
    assert abs(K0 - K1).max() <= 1e-12 * abs(K0).max()

    def solve(mesh):
        spec = ProblemSpec(gamma=3.0, alpha=0.0, mesh=mesh, partition=UPPER_ARC,
                           mu1=MeasureData.dirac((0.0, -0.4), 1.0),
                           mu2=MeasureData.dirac((0.0, 1.0), 1.0, support="gamma2"))
        return solve_regularized(spec, 3).coefficients

    u0, u1 = solve(shortcut), solve(general)
    assert np.max(np.abs(u0 - u1)) <= 1e-10 * np.max(np.abs(u0))


@pytest.mark.slow
def test_green_function_oracle_at_shipped_resolution():
    cfg = load_experiment_config(CONFIGS / "green_disk.toml", "solve")
    spec = main.build_problem(cfg)
    assert spec.mesh.h_max <= 0.02
    sol = solve_regularized(spec, cfg.solve.n)
    r = np.hypot(*spec.mesh.vertices.T)
    far = r > 0.3
    exact = -np.log(r[far]) / (2.0 * math.pi)
    err = np.linalg.norm(sol.coefficients[far] - exact) / np.linalg.norm(exact)
    assert err <= 0.02
