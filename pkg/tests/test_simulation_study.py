"""Scaled simulation-study checks. Run with ``pytest -m slow``."""
import os
from functools import partial

import numpy as np
import pytest

from lbsimex.config import Method, SimexConfig, SimScenario
from lbsimex.datagen import calibrate_censoring, simulate_cohort
from lbsimex.harness import run_simulation
from lbsimex.links import PH, LinkKind
from lbsimex.montecarlo import Stream, parallel_map, stream_key
from lbsimex.simex import simex_beta, simex_H

pytestmark = pytest.mark.slow

WORKERS = os.cpu_count() or 1
SEED = 20240601
METHODS = [Method.NAIVE, Method.SIMEX, Method.TRUE]


def _table(link: LinkKind):
    scenario = SimScenario(link=link, n=200, target_censoring=0.25, sigma_eta=0.5)
    config = SimexConfig(B=50, bootstrap_reps=20, seed=SEED)
    rows = run_simulation(scenario, METHODS, 200, config, rng_seed=SEED, workers=WORKERS)
    return {r.method: r for r in rows}


def test_ph_table_at_moderate_error():
    rows = _table(LinkKind.PH)
    true, naive, simex = rows["true"], rows["naive"], rows["simex"]
    assert all(abs(b) <= 0.05 for b in true.bias)
    assert all(b <= -0.05 for b in naive.bias)
    assert all(abs(b) <= 0.08 for b in simex.bias)
    assert all(s < m for s, m in zip(simex.mse, naive.mse))
    assert all(88.0 <= cp <= 99.0 for cp in simex.cp)


def test_po_table_at_moderate_error():
    rows = _table(LinkKind.PO)
    naive, simex = rows["naive"], rows["simex"]
    assert all(abs(b) <= 0.08 for b in simex.bias)
    assert all(s < m for s, m in zip(simex.mse, naive.mse))


def _simex_errors(r, scenario, c, config):
    cohort = simulate_cohort(scenario, c, SEED, r)
    stream = stream_key(Stream.SIMEX, r, 0)
    _, ext = simex_beta(cohort, PH, config, 1, stream)
    beta = ext.predicted_at_minus_one
    H = simex_H(cohort, PH, config, beta, 1, stream)
    lo, hi = np.quantile(H.event_times, [0.1, 0.9])
    inner = (H.event_times >= lo) & (H.event_times <= hi)
    sup = np.max(np.abs(H.values[inner] - np.log(H.event_times[inner])))
    return np.mean(np.abs(beta - np.asarray(scenario.beta0))), sup


def test_simex_errors_shrink_with_sample_size():
    beta_err, H_err = [], []
    for n in (100, 200, 400):
        scenario = SimScenario(n=n, target_censoring=0.25, sigma_eta=0.5)
        c = calibrate_censoring(scenario, seed=SEED)
        config = SimexConfig(B=50, bootstrap_reps=0, seed=SEED).with_cov(scenario.error_cov)
        task = partial(_simex_errors, scenario=scenario, c=c, config=config)
        errs = np.array(parallel_map(task, range(100), WORKERS))
        beta_err.append(errs[:, 0].mean())
        H_err.append(errs[:, 1].mean())
    assert beta_err[0] > beta_err[1] > beta_err[2]
    assert H_err[0] > H_err[1] > H_err[2]
