from pathlib import Path

import pytest

import main
from config import HarnessConfig
from config.experiment_config import ExperimentConfig, load_experiment_config
from fem.errors import ConfigError

pytestmark = pytest.mark.unit

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = load_experiment_config(path)
    assert cfg.subcommand in {"solve", "study", "a2", "cs-check"}
    assert cfg.name


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.study.q_grid == [1.2, 1.5, 1.8, 2.0, 2.2]
    assert cfg.study.n_list == [4, 8, 16, 32, 64]
    assert cfg.cs.resolutions == [(256, 64)]
    assert cfg.bump_profile.name == "quartic"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_experiment_config(tmp_path / "nope.toml")


def test_bad_toml(tmp_path):
    with pytest.raises(ConfigError, match="not valid TOML"):
        load_experiment_config(_write(tmp_path, "name = [unclosed"))


def test_subcommand_mismatch(tmp_path):
    path = _write(tmp_path, 'subcommand = "a2"\n')
    with pytest.raises(ConfigError, match="'a2' config"):
        load_experiment_config(path, "solve")
    assert load_experiment_config(path, "a2").subcommand == "a2"


@pytest.mark.parametrize("body", [
    "[problem]\ngamma = 0.5\n",
    "[problem]\nalpha = 1.0\n",
    "[mesh]\nh = 0\n",
    "[study]\nn_list = [4, 4, 8]\n",
    "[study]\ntheta = 2.0\n",
    "[cs]\nk_list = [1, 20]\nresolutions = [[64, 32]]\n",
    "[solve]\nn = 3\nunknown_key = 1\n",
    "[mu1]\nsupport = \"gamma2\"\n",
])
def test_schema_violations_become_config_errors(tmp_path, body):
    with pytest.raises(ConfigError, match="invalid config"):
        load_experiment_config(_write(tmp_path, body))


def test_refinement_study_needs_three_levels(tmp_path):
    path = _write(tmp_path, "[mesh]\nlevels = 2\n[study]\nmode = \"refinement\"\n")
    with pytest.raises(ConfigError):
        load_experiment_config(path, "study")
    assert load_experiment_config(path, "solve").mesh.levels == 2


def test_trace_order_cross_check(tmp_path):
    path = _write(tmp_path, "[problem]\nalpha = 0.5\n[study]\ntrace_q_grid = [1.2]\n")
    with pytest.raises(ConfigError, match="outside"):
        load_experiment_config(path)


def test_harness_config_validation(monkeypatch):
    assert HarnessConfig.validate() == []
    monkeypatch.setattr(HarnessConfig, "GRADED_RATIO", 1.5)
    monkeypatch.setattr(HarnessConfig, "NEWTON_MAX_ITER", 0)
    problems = HarnessConfig.validate()
    assert len(problems) == 2
    assert any("GRADED_RATIO" in p for p in problems)


def test_center_grading_is_disk_only(tmp_path):
    path = _write(tmp_path, "[domain]\nkind = \"square\"\n[partition]\nkind = \"axis-split\"\noffset = 0.5\n"
                            "[mesh]\nh = 0.1\ncenter_grading = 3\n")
    with pytest.raises(ConfigError, match="center_grading"):
        load_experiment_config(path)


def test_shipped_green_config_resolves_h_max():
    cfg = load_experiment_config(CONFIGS / "green_disk.toml", "solve")
    assert main.build_mesh(cfg).h_max <= 0.02


def test_triangle_degree_range(monkeypatch):
    monkeypatch.setattr(HarnessConfig, "TRIANGLE_DEGREE", 9)
    assert any("TRIANGLE_DEGREE" in p for p in HarnessConfig.validate())
