"""
Measure-Data FEM Harness - Main Entry Point
Batch driver for the weighted measure-data solver, the regularity studies,
the A2 diagnostic and the fractional extension checks.
"""

import argparse
import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

# Add the project root to Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

# Load environment variables
load_dotenv('.env')

from config import HarnessConfig
from config.experiment_config import ExperimentConfig, load_experiment_config
from cs_extension import symbol_report
from cs_extension.extension import ExtensionProblem, extend, dtn_apply, extension_energy, lateral_inner
from cs_extension.fourier import FourierSeries
from fem.errors import ConfigError, DomainError, HarnessError, MeshResourceError, NumericError
from fem.mesh import Mesh, generate_disk_mesh, generate_square_mesh
from fem.problem import ProblemSpec
from fem.assembly import export_matrix_market
from fem.solver import solve_regularized, stiffness, weak_form_residual
from fem.weight import WeightSpec, a2_constant_estimate, radial_a2_product
from regularity.report import FLOAT_FORMAT
from regularity.study import NRule, regularity_study, sequence_study
from study_tracker import StudyStepTracker

logger = logging.getLogger("harness")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

ENERGY_IDENTITY_RTOL = 1e-2


def setup_logging(level: Optional[str] = None):
    logging.basicConfig(
        level=getattr(logging, (level or HarnessConfig.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="measure-fem", description="Measure-data FEM harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve one regularized problem and write the solution JSON"),
        ("study", "run a refinement or mollification-sequence study"),
        ("a2", "sample the A2 constant of the distance weight"),
        ("cs-check", "compare the discrete Dirichlet-to-Neumann map with |k|^(2s)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None, help="thread-pool size (overrides the config)")
        p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    return parser


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    logger.info(f"Wrote {path}")
    return path


def build_mesh(cfg: ExperimentConfig) -> Mesh:
    if cfg.domain.kind == "disk":
        return generate_disk_mesh(cfg.domain.radius, cfg.mesh.h, cfg.partition, cfg.mesh.center_grading)
    return generate_square_mesh(cfg.mesh.h, cfg.partition)


def build_problem(cfg: ExperimentConfig) -> ProblemSpec:
    return ProblemSpec(
        gamma=cfg.problem.gamma,
        alpha=cfg.problem.alpha,
        mesh=build_mesh(cfg),
        mu1=cfg.mu1,
        mu2=cfg.mu2,
        partition=cfg.partition,
        profile=cfg.bump_profile,
        r0=cfg.problem.r0,
        threads=cfg.threads,
    )


# ------------------------------------------------------------------ commands
def run_solve(cfg: ExperimentConfig, out: Path, tracker: StudyStepTracker) -> List[Path]:
    with tracker.step("problem", "building mesh and problem") as res:
        spec = build_problem(cfg)
        res["message"] = f"{spec.mesh.num_vertices} vertices, h_max={spec.mesh.h_max:.4g}"
    with tracker.step("solve", f"n = {cfg.solve.n}") as res:
        solution = solve_regularized(spec, cfg.solve.n)
        residual = weak_form_residual(spec, solution)
        res["message"] = f"{solution.telemetry.newton_iterations} Newton iterations, residual {residual:.3e}"
    payload = solution.to_dict()
    payload["weak_form_residual"] = residual
    payload["tracker"] = tracker.get_summary()
    paths = [write_json(out / "solution.json", payload)]
    if cfg.solve.export_matrix:
        path = out / "stiffness.mtx"
        export_matrix_market(stiffness(spec), str(path))
        paths.append(path)
    return paths


def run_study(cfg: ExperimentConfig, out: Path, tracker: StudyStepTracker) -> List[Path]:
    with tracker.step("problem", "building mesh and problem"):
        spec = build_problem(cfg)
    study = cfg.study
    if study.mode == "refinement":
        report = regularity_study(
            spec, cfg.mesh.levels, study.q_grid, NRule(**study.n_rule.model_dump()),
            theta_grid=study.theta_grid, trace_q_grid=study.trace_q_grid,
            threads=cfg.threads, tracker=tracker,
        )
    else:
        report = sequence_study(spec, study.n_list, theta=study.theta, t_grid=study.t_grid,
                                holder_q=study.holder_q, tracker=tracker)
    csv_path = report.to_csv(out / "report.csv")
    report.extras["config"] = cfg.model_dump(mode="json")
    report.extras["tracker"] = tracker.get_summary()
    return [csv_path, report.to_json(out / "report.json")]


def run_a2(cfg: ExperimentConfig, out: Path, tracker: StudyStepTracker) -> List[Path]:
    reports = []
    with tracker.step("a2", f"{len(cfg.a2.alphas)} exponents, {cfg.a2.n_balls} balls"):
        for alpha in cfg.a2.alphas:
            est = a2_constant_estimate(WeightSpec(alpha=alpha, domain=cfg.domain), cfg.a2.n_balls, cfg.seed)
            entry = est.model_dump()
            if cfg.a2.radial_product:
                entry["radial_product"] = radial_a2_product(alpha)
                entry["radial_product_exact"] = 1.0 / (1.0 - alpha ** 2)
            reports.append(entry)
    payload = {"status": "ok", "seed": cfg.seed, "reports": reports, "config": cfg.model_dump(mode="json"),
               "tracker": tracker.get_summary()}
    return [write_json(out / "a2.json", payload)]


def run_cs_check(cfg: ExperimentConfig, out: Path, tracker: StudyStepTracker) -> List[Path]:
    cs = cfg.cs
    with tracker.step("symbol", f"s = {cs.s_list}, k = {cs.k_list}"):
        frame = symbol_report(cs.s_list, cs.k_list, cs.resolutions, strip_height=cs.strip_height,
                              threads=cfg.threads)
    energies = []
    with tracker.step("energy", "energy identity per s"):
        n_x, n_y = cs.resolutions[-1]
        data = FourierSeries(modes=[])
        for k in cs.k_list:
            data = data + FourierSeries.cosine(k).scaled(1.0 / k)
        for s in cs.s_list:
            problem = ExtensionProblem(s=s, boundary_data=data, strip_height=cs.strip_height, n_x=n_x, n_y=n_y)
            field = extend(problem)
            pairing = lateral_inner(dtn_apply(problem, field), field.at(0), n_y)
            energy = extension_energy(field)
            rel_gap = abs(pairing - energy) / abs(energy)
            energies.append({"s": s, "dtn_pairing": pairing, "energy": energy, "rel_gap": rel_gap,
                             "within_tolerance": rel_gap <= ENERGY_IDENTITY_RTOL})
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "cs_report.csv"
    frame.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {csv_path}")
    payload = {"status": "ok", "energy_identity": energies, "config": cfg.model_dump(mode="json"),
               "tracker": tracker.get_summary()}
    return [csv_path, write_json(out / "cs_report.json", payload)]


COMMANDS = {"solve": run_solve, "study": run_study, "a2": run_a2, "cs-check": run_cs_check}
# steps each command records itself; studies add their own on top
COMMAND_STEPS = {"solve": 2, "study": 1, "a2": 1, "cs-check": 2}


def _fail(out: Path, error: BaseException, exit_code: int) -> int:
    logger.error(f"{type(error).__name__}: {error}\n{traceback.format_exc()}")
    details: Dict[str, Any] = {}
    history = getattr(error, "residual_history", None)
    if history:
        details["residual_history"] = history
    if getattr(error, "n", None) is not None:
        details["n"] = error.n
    try:
        write_json(out / "error.json", {
            "status": "error",
            "error_type": type(error).__name__,
            "message": str(error),
            "exit_code": exit_code,
            "details": details,
        })
    except OSError as e:
        logger.error(f"Could not write error.json: {e}")
    return exit_code


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, validate the config, dispatch; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging()
    out = Path(args.out)

    problems = HarnessConfig.validate()
    if problems:
        return _fail(out, ConfigError("; ".join(problems)), EXIT_USAGE)

    try:
        cfg = load_experiment_config(args.config, args.command)
        overrides = {k: v for k, v in (("threads", args.threads), ("seed", args.seed)) if v is not None}
        if overrides:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **overrides})
    except (ConfigError, ValidationError, DomainError) as e:
        return _fail(out, e, EXIT_USAGE)

    tracker = StudyStepTracker(cfg.name)
    tracker.set_total_steps(COMMAND_STEPS[args.command])
    logger.info(f"Running '{args.command}' for {cfg.name} (threads={cfg.threads}, seed={cfg.seed})")
    try:
        paths = COMMANDS[args.command](cfg, out, tracker)
    except (ConfigError, ValidationError, DomainError, MeshResourceError) as e:
        return _fail(out, e, EXIT_USAGE)
    except NumericError as e:
        return _fail(out, e, EXIT_NUMERIC)
    except HarnessError as e:
        return _fail(out, e, EXIT_NUMERIC)

    for path in paths:
        logger.info(f"Output: {path}")
    return EXIT_OK


def main():
    """Console entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
