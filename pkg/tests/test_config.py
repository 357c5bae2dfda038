import os

import numpy as np
import pytest
from pydantic import ValidationError

from lbsimex.config import (
    Method,
    Profile,
    SimexConfig,
    SimScenario,
    load_profile,
    zeta_grid,
)
from lbsimex.errors import ConfigError
from lbsimex.survival import WeightScale


@pytest.fixture
def clean_env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("LBSIMEX_PROFILE", raising=False)
    monkeypatch.delenv("LBSIMEX_WORKERS", raising=False)
    return tmp_path


def test_default_zeta_grid():
    assert zeta_grid() == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    assert zeta_grid(1.0, 0.5) == [0.0, 0.5, 1.0]
    with pytest.raises(ConfigError):
        zeta_grid(2.0, 0.0)


def test_packaged_profiles(clean_env):
    desk = load_profile("desk")
    assert (desk.reps, desk.B, desk.bootstrap_reps) == (200, 50, 200)
    assert desk.methods == [Method.NAIVE, Method.SIMEX, Method.TRUE]
    full = load_profile("full")
    assert (full.reps, full.B) == (1000, 500)
    whas = load_profile("whas")
    assert whas.csv.trunc_time == "los" and whas.csv.covariates == ["bmi", "bp"]


def test_unknown_profile(clean_env):
    with pytest.raises(ConfigError):
        load_profile("nope")


def test_local_file_and_environment_override(clean_env, monkeypatch):
    local = clean_env / ".lbsimex.toml"
    local.write_text('reps = 5\nweight_scale = "onset"\n[csv]\nstatus = "dead"\n')
    monkeypatch.setenv("LBSIMEX_WORKERS", "3")
    p = load_profile(None, local)
    assert p.name == "desk"
    assert p.reps == 5 and p.workers == 3
    assert p.weight_scale is WeightScale.ONSET
    assert p.csv.status == "dead" and p.csv.obs_time == "obs_time"


def test_dotenv_selects_the_profile(clean_env):
    (clean_env / ".env").write_text("LBSIMEX_PROFILE=full\n")
    try:
        assert load_profile().name == "full"
    finally:
        os.environ.pop("LBSIMEX_PROFILE", None)


def test_malformed_toml(clean_env):
    bad = clean_env / "bad.toml"
    bad.write_text("reps = = 3\n")
    with pytest.raises(ConfigError):
        load_profile(None, bad)


def test_profile_builds_simex_config():
    cfg = Profile(B=7, zeta_max=1.0, zeta_step=0.5, tol=1e-6).simex_config([[0.5]])
    assert cfg.B == 7 and cfg.zeta_grid == [0.0, 0.5, 1.0]
    assert cfg.solver.tol == 1e-6
    assert np.array_equal(cfg.covariance(1), [[0.5]])


def test_simex_config_covariance_checks():
    with pytest.raises(ConfigError):
        SimexConfig().covariance(2)
    with pytest.raises(ConfigError):
        SimexConfig(error_cov=[[1.0]]).covariance(2)
    with pytest.raises(ValidationError):
        SimexConfig(error_cov=[[1.0, 2.0], [2.0, 1.0]])
    cfg = SimexConfig().with_cov(np.eye(2))
    assert cfg.error_cov == [[1.0, 0.0], [0.0, 1.0]]


def test_scenario_shapes_are_checked():
    with pytest.raises(ValidationError):
        SimScenario(beta0=[1.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        SimScenario(target_censoring=1.2)
    assert SimScenario().p == 2
