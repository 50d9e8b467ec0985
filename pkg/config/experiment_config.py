"""
Experiment configuration: TOML documents validated by pydantic before any
computation starts.
"""
import math
import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fem.domain import BoundaryPartitionRule, Domain
from fem.errors import ConfigError
from fem.measure import BumpProfile, MeasureData
from regularity.functionals import trace_order

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

Subcommand = Literal["solve", "study", "a2", "cs-check"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MeshSection(_Section):
    h: float = Field(0.1, gt=0, description="Target mesh size of level 0")
    levels: int = Field(1, ge=1, description="Number of uniformly refined levels (study only)")
    center_grading: int = Field(0, ge=0, description="Graded rings added toward the disk center (disk only)")


class ProblemSection(_Section):
    alpha: float = Field(0.0, gt=-1.0, lt=1.0)
    gamma: float = Field(2.0, gt=1.0, description="Boundary exponent, must exceed 1")
    profile: Literal["quartic", "tent"] = "quartic"
    r0: Optional[float] = Field(None, gt=0)

    @field_validator("alpha", "gamma")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("exponents must be finite")
        return v


class SolveSection(_Section):
    n: int = Field(8, ge=1, description="Mollification index")
    export_matrix: bool = False


class NRuleSection(_Section):
    base: int = Field(2, ge=1)
    step: int = Field(1, ge=0)


class StudySection(_Section):
    mode: Literal["refinement", "sequence"] = "refinement"
    q_grid: List[float] = Field(default_factory=lambda: [1.2, 1.5, 1.8, 2.0, 2.2])
    theta_grid: List[float] = Field(default_factory=list)
    trace_q_grid: List[float] = Field(default_factory=list)
    n_rule: NRuleSection = Field(default_factory=NRuleSection)
    n_list: List[int] = Field(default_factory=lambda: [4, 8, 16, 32, 64])
    theta: float = 1.5
    t_grid: List[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    holder_q: List[float] = Field(default_factory=lambda: [1.2, 1.5])

    @field_validator("q_grid", "holder_q")
    @classmethod
    def _q_at_least_one(cls, v: List[float]) -> List[float]:
        bad = [q for q in v if not q >= 1.0]
        if bad:
            raise ValueError(f"q values must be >= 1, got {bad}")
        return v

    @field_validator("theta_grid")
    @classmethod
    def _theta_above_one(cls, v: List[float]) -> List[float]:
        bad = [t for t in v if not t > 1.0]
        if bad:
            raise ValueError(f"theta values must exceed 1, got {bad}")
        return v

    @field_validator("theta")
    @classmethod
    def _theta_range(cls, v: float) -> float:
        if not 1.0 < v < 2.0:
            raise ValueError(f"theta must lie in (1, 2), got {v}")
        return v

    @field_validator("t_grid")
    @classmethod
    def _t_nonnegative(cls, v: List[float]) -> List[float]:
        if any(t < 0 for t in v):
            raise ValueError("level-set thresholds must be >= 0")
        return v

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, v: List[int]) -> List[int]:
        if not v or v[0] < 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"n_list must be positive and strictly increasing, got {v}")
        return v


class A2Section(_Section):
    alphas: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75])
    n_balls: int = Field(2000, ge=1)
    radial_product: bool = True

    @field_validator("alphas")
    @classmethod
    def _alpha_range(cls, v: List[float]) -> List[float]:
        bad = [a for a in v if not -1.0 < a < 1.0]
        if bad:
            raise ValueError(f"alpha values must lie in (-1, 1), got {bad}")
        return v


class CSSection(_Section):
    s_list: List[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    k_list: List[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    resolutions: List[Tuple[int, int]] = Field(default_factory=lambda: [(256, 64)])
    strip_height: Optional[float] = Field(None, gt=0)

    @field_validator("s_list")
    @classmethod
    def _s_range(cls, v: List[float]) -> List[float]:
        bad = [s for s in v if not 0.0 < s < 1.0]
        if bad:
            raise ValueError(f"s values must lie in (0, 1), got {bad}")
        return v

    @field_validator("k_list")
    @classmethod
    def _modes(cls, v: List[int]) -> List[int]:
        if not v or min(v) < 1:
            raise ValueError("k_list must hold modes >= 1")
        return v

    @model_validator(mode="after")
    def _resolved(self) -> "CSSection":
        for n_x, n_y in self.resolutions:
            if n_x < 4 or n_y < 4 or n_y % 2:
                raise ValueError(f"resolution ({n_x}, {n_y}) needs n_x, n_y >= 4 and even n_y")
            if max(self.k_list) > n_y // 4:
                raise ValueError(f"mode {max(self.k_list)} is above n_y/4 for n_y = {n_y}")
        return self


class ExperimentConfig(_Section):
    """One experiment; sections irrelevant to the subcommand keep their defaults."""

    subcommand: Optional[Subcommand] = None
    name: str = "experiment"
    seed: int = Field(0, ge=0, lt=2 ** 64)
    threads: int = Field(1, ge=1)
    domain: Domain = Field(default_factory=Domain)
    partition: BoundaryPartitionRule = Field(default_factory=BoundaryPartitionRule)
    mesh: MeshSection = Field(default_factory=MeshSection)
    problem: ProblemSection = Field(default_factory=ProblemSection)
    mu1: MeasureData = Field(default_factory=lambda: MeasureData(support="interior"))
    mu2: MeasureData = Field(default_factory=lambda: MeasureData(support="gamma2"))
    solve: SolveSection = Field(default_factory=SolveSection)
    study: StudySection = Field(default_factory=StudySection)
    a2: A2Section = Field(default_factory=A2Section)
    cs: CSSection = Field(default_factory=CSSection)

    @model_validator(mode="after")
    def _cross_checks(self) -> "ExperimentConfig":
        if self.mu1.support != "interior":
            raise ValueError("mu1 must have support = 'interior'")
        if self.mu2.support != "gamma2":
            raise ValueError("mu2 must have support = 'gamma2'")
        if self.mesh.center_grading and self.domain.kind != "disk":
            raise ValueError("mesh.center_grading applies to the disk only")
        if self.subcommand == "study" and self.study.mode == "refinement" and self.mesh.levels < 3:
            raise ValueError(f"a refinement study needs mesh.levels >= 3, got {self.mesh.levels}")
        for q in self.study.trace_q_grid:
            s = trace_order(q, self.problem.alpha)
            if not (q > 1.0 and 0.0 < s < 1.0):
                raise ValueError(f"trace q = {q} gives order {s:g} outside (0, 1) at alpha = {self.problem.alpha}")
        return self

    @property
    def bump_profile(self) -> BumpProfile:
        return BumpProfile(name=self.problem.profile)


def load_experiment_config(path, subcommand: Optional[str] = None) -> ExperimentConfig:
    """Read and validate a TOML experiment config; schema problems raise ConfigError."""
    path = Path(path)
    try:
        with path.open("rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path} is not valid TOML: {e}") from e

    if subcommand is not None:
        declared = raw.get("subcommand")
        if declared is not None and declared != subcommand:
            raise ConfigError(f"{path} is a '{declared}' config, not '{subcommand}'")
        raw["subcommand"] = subcommand
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}:\n{e}") from e
