import numpy as np
import pytest

from lbsimex.config import SimexConfig, SimScenario
from lbsimex.datagen import draw_prevalent_cohort
from lbsimex.montecarlo import substream
from lbsimex.survival import Cohort


@pytest.fixture
def tiny_cohort() -> Cohort:
    return Cohort.from_arrays(
        trunc_time=[0.0, 0.2, 0.1, 0.5, 0.3],
        obs_time=[1.0, 0.9, 2.0, 1.5, 0.8],
        status=[1, 0, 1, 1, 0],
        W=[[0.5], [-0.3], [1.2], [0.0], [-1.0]],
    )


@pytest.fixture(scope="session")
def ph_scenario() -> SimScenario:
    return SimScenario(n=200, sigma_eta=0.5)


@pytest.fixture(scope="session")
def ph_cohort(ph_scenario) -> Cohort:
    return draw_prevalent_cohort(ph_scenario, 2.0, substream(7, 3, 0))


@pytest.fixture(scope="session")
def small_cohort() -> Cohort:
    return draw_prevalent_cohort(SimScenario(n=60, sigma_eta=0.5), 2.0, substream(8, 3, 0))


@pytest.fixture
def fast_simex() -> SimexConfig:
    return SimexConfig(B=4, bootstrap_reps=0, seed=11, error_cov=(0.5 * np.eye(2)).tolist())
