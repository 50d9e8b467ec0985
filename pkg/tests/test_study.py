from pathlib import Path

import numpy as np
import pytest

import main
from config.experiment_config import load_experiment_config
from fem.errors import DomainError, NumericError
from regularity.embedding import EmbeddingProbe
from regularity.functionals import weighted_critical_exponent
from regularity.report import CSV_COLUMNS, RegularityReport, fit_slope
from regularity.study import NRule, _boundary_tail_decay, regularity_study, sequence_study, threshold_table
from study_tracker import StudyStepTracker

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_n_rule_forms():
    assert NRule(base=4, step=1)(2) == 6
    assert NRule(base=3, step=0)(5) == 3
    with pytest.raises(ValueError):
        NRule(base=0)


def test_threshold_table_keys():
    table = threshold_table()
    assert table["unweighted"] == 2.0
    assert {"weighted_delta_0.05", "weighted_delta_0.1", "weighted_delta_0.2"} <= set(table)
    assert all(v < 2.0 for k, v in table.items() if k != "unweighted")


@pytest.mark.unit
def test_threshold_table_reports_the_embedding_estimate():
    grid = [1.0, 2.0, 3.0]
    estimate = EmbeddingProbe(alpha=0.5, k_grid=grid, scales=[0.2, 0.1], ratios=[[1.0, 1.0]] * 3,
                              growth=[1.0, 1.0, 1.5], cap=1.1, k_max=2.0)
    table = threshold_table(embedding=estimate)
    assert table["estimated_k_max_alpha_0.5"] == 2.0
    # k_max = N/(N-1) leaves no positive delta
    assert "weighted_estimated_delta_alpha_0.5" not in table
    wider = estimate.model_copy(update={"k_max": 3.0})
    assert threshold_table(embedding=wider)["weighted_estimated_delta_alpha_0.5"] == pytest.approx(
        weighted_critical_exponent(2, 1.0))


@pytest.mark.unit
def test_fit_slope_cases():
    h = [0.4, 0.2, 0.1, 0.05]
    flat = fit_slope(h, [3.0, 3.0, 3.0, 3.0])
    assert flat.bounded and flat.slope == pytest.approx(0.0, abs=1e-12)
    blowup = fit_slope(h, [1.0 / x for x in h])
    assert blowup.slope == pytest.approx(-1.0)
    assert not blowup.bounded
    assert blowup.last_growth == pytest.approx(2.0)
    assert fit_slope(h, [0.0] * 4).bounded
    # unordered input is sorted from coarse to fine
    assert fit_slope(h[::-1], [1.0 / x for x in h[::-1]]).slope == pytest.approx(-1.0)


@pytest.mark.unit
def test_fit_slope_rejects_bad_input():
    with pytest.raises(NumericError):
        fit_slope([0.2, 0.1], [1.0, 2.0])
    with pytest.raises(NumericError):
        fit_slope([0.4, 0.2, 0.1], [1.0, -1.0, 2.0])


@pytest.mark.unit
def test_report_csv_is_deterministic(tmp_path):
    report = RegularityReport()
    for level, h in enumerate((0.2, 0.1, 0.05)):
        report.add(level, h, level + 2, "W1q", 1.5, 1.0 + 0.1 * level)
    a = report.to_csv(tmp_path / "a.csv").read_text()
    b = report.to_csv(tmp_path / "b.csv").read_text()
    assert a == b
    assert a.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert "1.000000000000e+00" in a
    fits = report.fit_all()
    assert len(fits) == 1 and report.fit_for("W1q", 1.5) is fits[0]
    assert report.fit_for("W1q", 1.2) is None


@pytest.mark.unit
def test_empty_report_frame():
    assert list(RegularityReport().frame().columns) == CSV_COLUMNS


@pytest.mark.integration
def test_study_needs_three_levels(dirac_problem):
    with pytest.raises(DomainError):
        regularity_study(dirac_problem, 2, [1.5], NRule())


@pytest.mark.integration
def test_refinement_study_separates_energy_from_subcritical_norms(dirac_problem):
    tracker = StudyStepTracker("refinement")
    report = regularity_study(dirac_problem, 3, [1.2, 2.0], NRule(base=2, step=1), theta_grid=[1.5],
                              tracker=tracker)
    energy = report.fit_for("dirichlet_energy", 2.0)
    sub = report.fit_for("W1q", 1.2)
    assert energy.last_growth > 1.05
    assert not energy.bounded
    assert abs(sub.slope) < abs(energy.slope)
    assert report.extras["h_max"] == sorted(report.extras["h_max"], reverse=True)
    assert len(report.extras["newton_iterations"]) == 3
    assert report.extras["n"] == [2, 3, 4]
    # the finest mesh is too coarse for two bump scales
    assert report.extras["embedding"] is None
    summary = tracker.get_summary()
    assert summary["completed_steps"] == 5 and summary["failed_steps"] == 0
    assert summary["expected_steps"] == summary["total_steps"] == 5


@pytest.mark.slow
def test_subcritical_norms_stay_bounded(dirac_problem):
    report = regularity_study(dirac_problem, 4, [1.2, 1.5, 2.0], NRule(base=3, step=1))
    for q in (1.2, 1.5):
        assert report.fit_for("W1q", q).bounded
    assert report.fit_for("grad_Lq", 2.0).last_growth > 1.05


@pytest.mark.integration
def test_sequence_study_extras(mixed_problem):
    report = sequence_study(mixed_problem, [2, 3, 4], theta=1.5, t_grid=(0.0, 0.5), holder_q=(1.5,))
    assert report.extras["tail_inequality_holds"] is True
    assert len(report.extras["holder_chain"]) == 3
    assert all(row["lhs"] <= row["rhs"] * (1.0 + 1e-9) for row in report.extras["holder_chain"])
    frame = report.frame()
    assert sorted(frame.n.unique()) == [2, 3, 4]
    assert set(frame.functional) >= {"phi_theta_energy", "phi_theta_bound", "boundary_Lgamma", "lebesgue_E"}
    bounds = report.series("phi_theta_bound", 1.5)["value"].to_numpy()
    assert np.allclose(bounds, bounds[0], rtol=1e-9)
    cheb = report.series("lebesgue_bound", 0.5)["value"].to_numpy()
    measured = report.series("lebesgue_E", 0.5)["value"].to_numpy()
    assert len(cheb) == 3 and np.all(measured <= cheb * (1.0 + 1e-12))
    assert report.series("lebesgue_bound", 0.0).empty
    assert "boundary_tail_decay" in report.extras
    assert isinstance(report.extras["boundary_tail_decays"], bool)


@pytest.mark.unit
def test_boundary_tail_decay_ratio():
    report = RegularityReport()
    for n, (start, end) in zip((2, 3, 4), ((2.0, 0.01), (4.0, 0.015), (3.0, 0.0))):
        report.add(0, 0.1, n, "boundary_tail", 0.0, start)
        report.add(0, 0.1, n, "boundary_tail", 4.0, end)
    assert _boundary_tail_decay(report, (0.0, 1.0, 4.0)) == pytest.approx(0.015 / 2.0)
    assert _boundary_tail_decay(report, (0.5, 4.0)) is None
    report.add(0, 0.1, 5, "boundary_tail", 0.0, 0.0)
    assert _boundary_tail_decay(report, (0.0, 4.0)) is None


def test_tracker_records_failures():
    tracker = StudyStepTracker("run")
    tracker.set_total_steps(2)
    with tracker.step("first", "ok") as out:
        out["message"] = "fine"
        out["count"] = 3
    with pytest.raises(RuntimeError):
        with tracker.step("second", "boom"):
            raise RuntimeError("nope")
    summary = tracker.get_summary()
    assert summary["expected_steps"] == 2
    assert summary["completed_steps"] == 1 and summary["failed_steps"] == 1
    assert summary["steps"][0]["message"] == "fine"
    assert summary["steps"][0]["data"] == {"count": 3}
    assert "RuntimeError: nope" in summary["steps"][1]["message"]
    assert tracker.current_step is None


def _shipped(name):
    cfg = load_experiment_config(CONFIGS / name, "study")
    return cfg, main.build_problem(cfg)


@pytest.mark.slow
def test_shipped_refinement_study_separates_the_regimes():
    cfg, spec = _shipped("dirac_refinement_study.toml")
    study = cfg.study
    report = regularity_study(spec, cfg.mesh.levels, study.q_grid, NRule(**study.n_rule.model_dump()),
                              theta_grid=study.theta_grid)
    for q in (1.2, 1.5, 1.8):
        fit = report.fit_for("W1q", q)
        assert fit.bounded and abs(fit.slope) < 0.05, (q, fit.slope)
    assert report.fit_for("dirichlet_energy", 2.0).last_growth >= 1.15
    assert report.extras["embedding"]["k_max"] >= 2.0
    assert report.thresholds["estimated_k_max_alpha_0"] == report.extras["embedding"]["k_max"]


@pytest.mark.slow
@pytest.mark.parametrize("name", ["estimates_alpha_0.toml", "estimates_alpha_p05.toml", "estimates_alpha_m05.toml"])
def test_shipped_sequence_estimates_settle(name):
    cfg, spec = _shipped(name)
    study = cfg.study
    report = sequence_study(spec, study.n_list, theta=study.theta, t_grid=study.t_grid, holder_q=study.holder_q)
    for functional, param in (("phi_theta_energy", study.theta), ("boundary_Lgamma", spec.gamma)):
        values = report.series(functional, param)["value"].to_numpy()[-4:]
        median = float(np.median(values))
        assert (values.max() - values.min()) / median <= 0.10, (functional, values)
        assert values.max() <= 1.1 * median
    assert report.extras["tail_inequality_holds"] is True
    assert report.series("boundary_tail", 0.0)["value"].min() > 0.0
    assert report.extras["boundary_tail_decays"] is True
    assert report.extras["boundary_tail_decay"] <= 0.01
