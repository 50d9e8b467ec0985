"""
Configuration for the measure-data FEM harness.

Every constant can be overridden through an environment variable of the same
name (a local .env file is picked up by python-dotenv).
"""
import os
from typing import List

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


class HarnessConfig:
    """Numerical defaults shared by the solver, quadrature and studies."""

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Mesh generation
    MAX_MESH_VERTICES = _env_int("MAX_MESH_VERTICES", 2_000_000)
    LOCATE_CANDIDATES = _env_int("LOCATE_CANDIDATES", 12)

    # Newton / linear solver
    NEWTON_MAX_ITER = _env_int("NEWTON_MAX_ITER", 100)
    NEWTON_RTOL = _env_float("NEWTON_RTOL", 1e-10)
    ARMIJO_C1 = _env_float("ARMIJO_C1", 1e-4)
    ARMIJO_MAX_HALVINGS = _env_int("ARMIJO_MAX_HALVINGS", 30)
    CG_RTOL = _env_float("CG_RTOL", 1e-12)
    CG_MAXITER_FACTOR = _env_int("CG_MAXITER_FACTOR", 10)
    ILU_ALPHA_THRESHOLD = _env_float("ILU_ALPHA_THRESHOLD", 0.5)

    # Graded quadrature toward the boundary
    GAUSS_ORDER = _env_int("GAUSS_ORDER", 4)
    TRIANGLE_DEGREE = _env_int("TRIANGLE_DEGREE", 8)
    GRADED_RATIO = _env_float("GRADED_RATIO", 0.25)
    GRADED_DEPTH = _env_int("GRADED_DEPTH", 12)
    GRADED_POINTS = _env_int("GRADED_POINTS", 8)
    NEAR_BOUNDARY_FACTOR = _env_float("NEAR_BOUNDARY_FACTOR", 2.0)
    EDGE_GAUSS_POINTS = _env_int("EDGE_GAUSS_POINTS", 4)

    # Mollifier sampling
    BUMP_RADIAL_POINTS = _env_int("BUMP_RADIAL_POINTS", 8)
    BUMP_ANGULAR_POINTS = _env_int("BUMP_ANGULAR_POINTS", 32)
    BUMP_ARC_POINTS = _env_int("BUMP_ARC_POINTS", 16)

    # Parallel assembly
    DEFAULT_THREADS = _env_int("DEFAULT_THREADS", 1)

    # Caffarelli-Silvestre grid
    CS_NX = _env_int("CS_NX", 256)
    CS_NY = _env_int("CS_NY", 64)

    @classmethod
    def validate(cls) -> List[str]:
        """Return a list of configuration problems (empty when valid)."""
        problems = []
        if not 0.0 < cls.GRADED_RATIO < 1.0:
            problems.append(f"GRADED_RATIO must lie in (0, 1), got {cls.GRADED_RATIO}")
        if cls.GRADED_DEPTH < 1:
            problems.append(f"GRADED_DEPTH must be >= 1, got {cls.GRADED_DEPTH}")
        if cls.GRADED_POINTS < 1:
            problems.append(f"GRADED_POINTS must be >= 1, got {cls.GRADED_POINTS}")
        if not 1 <= cls.TRIANGLE_DEGREE <= 8:
            problems.append(f"TRIANGLE_DEGREE must lie in 1..8, got {cls.TRIANGLE_DEGREE}")
        if cls.NEWTON_MAX_ITER < 1:
            problems.append(f"NEWTON_MAX_ITER must be >= 1, got {cls.NEWTON_MAX_ITER}")
        if cls.DEFAULT_THREADS < 1:
            problems.append(f"DEFAULT_THREADS must be >= 1, got {cls.DEFAULT_THREADS}")
        if cls.LOCATE_CANDIDATES < 1:
            problems.append(f"LOCATE_CANDIDATES must be >= 1, got {cls.LOCATE_CANDIDATES}")
        if cls.MAX_MESH_VERTICES < 3:
            problems.append("MAX_MESH_VERTICES must allow at least one triangle")
        return problems
