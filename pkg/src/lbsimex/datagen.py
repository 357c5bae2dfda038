"""Synthetic prevalent cohorts under the transformation model.

Failure times follow H(T*) = log T* = -X*'beta0 + eps. A uniform onset-to-
enrolment time A* is drawn independently and only subjects with T* >= A* are
enrolled, which produces length-biased sampling without ever computing the
normalising constant of the biased density.
"""
from __future__ import annotations
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import bisect

from .config import SimScenario
from .errors import CalibrationRangeError, InvalidArgumentError, ScenarioInfeasibleError
from .links import LinkKind
from .logging import debug
from .montecarlo import Stream, noise_factor, stream_key, substream
from .survival import Cohort

DRAW_BUDGET = 10_000_000
MIN_ACCEPTANCE = 1e-6
PILOT_SIZE = 100_000
MAX_BATCH = 1_000_000
C_RANGE = (1e-3, 1e3)
CALIBRATION_TOL = 0.005


def _model_errors(link: LinkKind, size: int, rng: np.random.Generator) -> np.ndarray:
    if LinkKind(link) is LinkKind.PH:
        # P(eps > x) = exp(-e^x): cumulative hazard e^x
        return np.log(rng.standard_exponential(size))
    return rng.logistic(size=size)


def _accepted(scenario: SimScenario, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    """(X, T, A) for the first ``n`` draws with T* >= A*."""
    beta0 = np.asarray(scenario.beta0, dtype=float)
    L = noise_factor(scenario.cov_x)
    Xs, Ts, As = [], [], []
    got = drawn = 0
    rate = 0.5
    while got < n:
        if drawn >= DRAW_BUDGET:
            raise ScenarioInfeasibleError(
                f"only {got}/{n} subjects enrolled after {drawn} draws (acceptance {got / drawn:.2e})"
            )
        m = int(min(DRAW_BUDGET - drawn, MAX_BATCH, max(4096, np.ceil(1.5 * (n - got) / rate))))
        X = rng.standard_normal((m, scenario.p)) @ L.T
        T = np.exp(-X @ beta0 + _model_errors(scenario.link, m, rng))
        A = rng.uniform(0.0, scenario.trunc_upper, size=m)
        keep = np.flatnonzero(T >= A)[: n - got]
        drawn += m
        got += keep.size
        Xs.append(X[keep])
        Ts.append(T[keep])
        As.append(A[keep])
        rate = max(got / drawn, MIN_ACCEPTANCE)
    return np.concatenate(Xs), np.concatenate(Ts), np.concatenate(As)


def add_measurement_error(X: np.ndarray, error_cov, rng: np.random.Generator) -> np.ndarray:
    """W = X + eta with eta ~ N(0, error_cov) drawn independently of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    L = noise_factor(error_cov)
    if L.shape[0] != X.shape[1]:
        raise InvalidArgumentError(f"error covariance is {L.shape[0]}x{L.shape[0]}, X has p={X.shape[1]}")
    return X + rng.standard_normal(X.shape) @ L.T


def draw_prevalent_cohort(scenario: SimScenario, c: float, rng: np.random.Generator) -> Cohort:
    if not c > 0:
        raise InvalidArgumentError(f"censoring bound c must be positive, got {c}")
    X, T, A = _accepted(scenario, scenario.n, rng)
    C = rng.uniform(0.0, c, size=scenario.n)
    Y = np.minimum(T, A + C)
    status = (T <= A + C).astype(np.int8)
    W = add_measurement_error(X, scenario.error_cov, rng)
    ids = [str(i + 1) for i in range(scenario.n)]
    return Cohort.from_arrays(A, Y, status, W, X=X, ids=ids)


def simulate_cohort(scenario: SimScenario, c: float, seed: int, rep: int) -> Cohort:
    return draw_prevalent_cohort(scenario, c, substream(seed, *stream_key(Stream.COHORT, rep, 0)))


def censoring_rate(scenario: SimScenario, c: float, seed: int, size: int = PILOT_SIZE) -> float:
    """Empirical censoring proportion of ``size`` enrolled subjects at bound ``c``."""
    rng = substream(seed, *stream_key(Stream.CALIBRATION))
    _, T, A = _accepted(scenario, size, rng)
    return float(np.mean(T > A + c * rng.uniform(size=size)))


def calibrate_censoring(
    scenario: SimScenario,
    target_rate: Optional[float] = None,
    seed: int = 20240601,
    pilot: int = PILOT_SIZE,
) -> float:
    """Censoring bound c giving ``target_rate`` censoring, by bisection on log c.

    One pilot of enrolled subjects and one vector of uniforms (C = c U) are
    reused for every evaluation, so the empirical rate is monotone in c.
    """
    target = scenario.target_censoring if target_rate is None else target_rate
    if not 0.05 < target < 0.95:
        raise InvalidArgumentError(f"target censoring rate must lie in (0.05, 0.95), got {target}")
    rng = substream(seed, *stream_key(Stream.CALIBRATION))
    _, T, A = _accepted(scenario, pilot, rng)
    U = rng.uniform(size=pilot)

    def gap(log_c: float) -> float:
        return float(np.mean(T > A + np.exp(log_c) * U)) - target

    lo, hi = np.log(C_RANGE[0]), np.log(C_RANGE[1])
    g_lo, g_hi = gap(lo), gap(hi)
    if abs(g_lo) <= CALIBRATION_TOL:
        return C_RANGE[0]
    if abs(g_hi) <= CALIBRATION_TOL:
        return C_RANGE[1]
    if not (g_lo > 0 > g_hi):
        raise CalibrationRangeError(
            f"censoring rate {target} is not reachable with c in {C_RANGE} "
            f"(rates {g_lo + target:.3f} .. {g_hi + target:.3f})"
        )
    log_c = bisect(gap, lo, hi, xtol=1e-10, maxiter=200)
    if abs(gap(log_c)) > CALIBRATION_TOL:
        # the rate jumps over the target between adjacent pilot points
        raise CalibrationRangeError(f"censoring rate {target} cannot be matched within {CALIBRATION_TOL}")
    c = float(np.exp(log_c))
    debug(f"calibrated c={c:.4g} for censoring {target} ({scenario.link.value}, sigma_eta={scenario.sigma_eta})")
    return c
