"""Simulation-extrapolation correction of the naive estimator.

For b = 1..B and every zeta on the grid the surrogate is re-contaminated as
W(b, zeta) = W + sqrt(zeta) L eta_b (one standard-normal matrix eta_b per b,
L the Cholesky factor of Sigma_eta), the estimating equations are refitted,
fits are averaged over b, and a quadratic in zeta is extrapolated to zeta = -1.
"""
from __future__ import annotations
from dataclasses import dataclass
from functools import partial
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, Field
from scipy.optimize import isotonic_regression

from .config import Extrapolant, Method, SimexConfig
from .errors import (
    ConfigError,
    InvalidArgumentError,
    NumericalError,
    ResampleError,
    UnstableContaminationError,
)
from .estimator import MonotoneStep, RiskDesign, fit_naive, fit_true, profile_H, solve_beta
from .links import TransformationLink
from .logging import debug, info, warn
from .montecarlo import Stream, noise_factor, parallel_map, stream_key, substream
from .survival import Cohort

# redraws allowed for a bootstrap resample without events
MAX_RESAMPLE_ATTEMPTS = 100
Z_975 = 1.959963984540054


@dataclass
class SimexPath:
    zeta_grid: np.ndarray       # (M,)
    beta_by_zeta: np.ndarray    # (M, p), mean over retained b
    raw_betas: np.ndarray       # (B, M, p), NaN where the fit was dropped
    converged: np.ndarray       # (B, M)
    dropped: np.ndarray         # (M,) dropped fits per zeta

    @property
    def dropped_fits(self) -> int:
        return int(self.dropped.sum())


@dataclass
class ExtrapolationFit:
    Gamma: np.ndarray                   # (q, 3): gamma_0, gamma_1, gamma_2 per coordinate
    predicted_at_minus_one: np.ndarray  # (q,)
    residuals: np.ndarray               # (M, q) observed minus fitted at each zeta

    def predict(self, zeta: Any) -> np.ndarray:
        return P.polyval(np.asarray(zeta, dtype=float), self.Gamma.T).T


def fit_extrapolant(
    zeta_grid: Sequence[float],
    values: Any,
    extrapolant: Extrapolant = Extrapolant.QUADRATIC,
) -> ExtrapolationFit:
    """Least-squares quadratic in zeta per column of ``values``, evaluated at zeta = -1."""
    z = np.asarray(zeta_grid, dtype=float)
    Y = np.asarray(values, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if z.size < extrapolant.n_params:
        raise ConfigError(f"{extrapolant.value} extrapolant needs {extrapolant.n_params} zeta values")
    if Y.shape[0] != z.size:
        raise InvalidArgumentError("one row of values per zeta is required")
    coef = P.polyfit(z, Y, 2)                       # (3, q)
    fitted = P.polyval(z, coef).T                   # (M, q)
    pred = coef[0] - coef[1] + coef[2]
    return ExtrapolationFit(Gamma=coef.T.copy(), predicted_at_minus_one=pred, residuals=Y - fitted)


def contaminate(W: Any, zeta: float, error_cov: Any, rng: np.random.Generator) -> np.ndarray:
    """W + sqrt(zeta) L eta with eta i.i.d. N(0, 1); the draw happens even at zeta = 0."""
    if not zeta >= 0:
        raise InvalidArgumentError(f"zeta must be non-negative, got {zeta}")
    W = np.asarray(W, dtype=float)
    L = noise_factor(error_cov)
    if L.shape[0] != W.shape[1]:
        raise InvalidArgumentError(f"error covariance is {L.shape[0]}x{L.shape[0]}, W has p={W.shape[1]}")
    eta = rng.standard_normal(W.shape)
    if zeta == 0:
        return W.copy()
    return W + np.sqrt(zeta) * (eta @ L.T)


def _contamination_key(stream: Tuple[int, ...], b: int) -> Tuple[int, ...]:
    return (*stream, *stream_key(Stream.CONTAMINATE, b))


def _resample_key(stream: Tuple[int, ...], r: int) -> Tuple[int, ...]:
    return (*stream, *stream_key(Stream.BOOTSTRAP, r))


def _contamination_rng(config: SimexConfig, stream: Tuple[int, ...], b: int) -> np.random.Generator:
    return substream(config.seed, *_contamination_key(stream, b))


# ---------- Stage 1-2: contaminated refits ----------

def _contaminated_fits(
    b: int,
    design: RiskDesign,
    link: TransformationLink,
    config: SimexConfig,
    stream: Tuple[int, ...],
    naive_beta: np.ndarray,
    naive_ok: bool,
) -> Tuple[np.ndarray, np.ndarray]:
    cohort = design.cohort
    cov = config.covariance(cohort.p)
    M = len(config.zeta_grid)
    betas = np.full((M, cohort.p), np.nan)
    ok = np.zeros(M, dtype=bool)
    warm = naive_beta
    for m, zeta in enumerate(config.zeta_grid):
        if zeta == 0:
            betas[m], ok[m] = naive_beta, naive_ok
            continue
        Wbz = contaminate(cohort.W, zeta, cov, _contamination_rng(config, stream, b))
        opts = config.solver.model_copy(update={"beta_init": list(map(float, warm))})
        try:
            fit = solve_beta(Wbz, cohort, link, opts, design)
        except NumericalError:
            continue
        if fit.converged:
            betas[m], ok[m] = fit.beta, True
            warm = fit.beta
    return betas, ok


def simex_beta(
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    workers: int = 1,
    stream: Tuple[int, ...] = (),
    design: Optional[RiskDesign] = None,
) -> Tuple[SimexPath, ExtrapolationFit]:
    if len(config.zeta_grid) < config.extrapolant.n_params:
        raise ConfigError("zeta grid is shorter than the number of extrapolant parameters")
    config.covariance(cohort.p)
    design = design if design is not None else RiskDesign.build(cohort, config.solver.weight_scale)
    naive = fit_naive(cohort, link, config.solver, design)
    task = partial(_contaminated_fits, design=design, link=link, config=config, stream=stream,
                   naive_beta=naive.beta, naive_ok=naive.converged)
    results = parallel_map(task, range(config.B), workers)

    raw = np.stack([r[0] for r in results])          # (B, M, p)
    conv = np.stack([r[1] for r in results])         # (B, M)
    dropped = (~conv).sum(axis=0)
    limit = config.max_drop_fraction * config.B
    for m, zeta in enumerate(config.zeta_grid):
        if dropped[m] > limit or dropped[m] == config.B:
            raise UnstableContaminationError(zeta, int(dropped[m]), config.B)
    if dropped.sum():
        debug(f"SIMEX dropped {int(dropped.sum())} non-convergent fits")
    mean = np.stack([raw[conv[:, m], m].mean(axis=0) for m in range(raw.shape[1])])
    path = SimexPath(np.asarray(config.zeta_grid, float), mean, raw, conv, dropped)
    return path, fit_extrapolant(config.zeta_grid, mean, config.extrapolant)


# ---------- Stage 4: H at beta_SIMEX ----------

@dataclass
class HExtrapolation:
    H: MonotoneStep                 # monotone repaired prediction at zeta = -1
    raw: np.ndarray                 # per-time prediction before the repair
    H_by_zeta: np.ndarray           # (M, K) averages over b
    fit: ExtrapolationFit
    max_adjustment: float


def _replayed_profiles(
    b: int,
    design: RiskDesign,
    link: TransformationLink,
    config: SimexConfig,
    stream: Tuple[int, ...],
    beta: np.ndarray,
) -> np.ndarray:
    cohort = design.cohort
    cov = config.covariance(cohort.p)
    out = np.empty((len(config.zeta_grid), design.times.size))
    for m, zeta in enumerate(config.zeta_grid):
        Wbz = contaminate(cohort.W, zeta, cov, _contamination_rng(config, stream, b))
        out[m] = profile_H(Wbz, cohort, link, beta, config.solver, design).values
    return out


def simex_H_detail(
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    beta_simex: Any,
    workers: int = 1,
    stream: Tuple[int, ...] = (),
    design: Optional[RiskDesign] = None,
) -> HExtrapolation:
    design = design if design is not None else RiskDesign.build(cohort, config.solver.weight_scale)
    beta = np.asarray(beta_simex, dtype=float)
    task = partial(_replayed_profiles, design=design, link=link, config=config, stream=stream,
                   beta=beta)
    per_b = np.stack(parallel_map(task, range(config.B), workers))   # (B, M, K)
    by_zeta = per_b.mean(axis=0)
    fit = fit_extrapolant(config.zeta_grid, by_zeta, config.extrapolant)
    raw = fit.predicted_at_minus_one
    repaired = isotonic_regression(raw, increasing=True).x
    adjustment = float(np.max(np.abs(repaired - raw))) if raw.size else 0.0
    if adjustment > 0:
        debug(f"monotone repair of extrapolated H moved values by at most {adjustment:.3g}")
    return HExtrapolation(MonotoneStep(design.times, repaired), raw, by_zeta, fit, adjustment)


def simex_H(
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    beta_simex: Any,
    workers: int = 1,
    stream: Tuple[int, ...] = (),
    design: Optional[RiskDesign] = None,
) -> MonotoneStep:
    return simex_H_detail(cohort, link, config, beta_simex, workers, stream, design).H


# ---------- point estimates and bootstrap ----------

def estimate(
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    method: Method,
    workers: int = 1,
    stream: Tuple[int, ...] = (),
) -> np.ndarray:
    """Point estimate of beta by one method; NaN when the fit does not converge."""
    method = Method(method)
    if method is Method.SIMEX:
        _, ext = simex_beta(cohort, link, config, workers, stream)
        return ext.predicted_at_minus_one
    fit = fit_naive(cohort, link, config.solver) if method is Method.NAIVE \
        else fit_true(cohort, link, config.solver)
    return fit.beta if fit.converged else np.full(cohort.p, np.nan)


@dataclass
class BootstrapResult:
    estimate: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    replicates: np.ndarray      # (reps, p), NaN rows for failed resamples
    failed: int


def _resample(cohort: Cohort, rng: np.random.Generator) -> Cohort:
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        sub = cohort.take(rng.integers(0, cohort.n, size=cohort.n))
        if sub.n_events > 0:
            return sub
    raise ResampleError(f"no resample with events in {MAX_RESAMPLE_ATTEMPTS} attempts")


def _bootstrap_rep(
    r: int,
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    method: Method,
    stream: Tuple[int, ...],
) -> np.ndarray:
    path = _resample_key(stream, r)
    sub = _resample(cohort, substream(config.seed, *path))
    try:
        return estimate(sub, link, config, method, 1, path)
    except NumericalError:
        return np.full(cohort.p, np.nan)


def bootstrap_ci(
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    method: Method = Method.SIMEX,
    workers: int = 1,
    stream: Tuple[int, ...] = (),
    point: Optional[np.ndarray] = None,
) -> BootstrapResult:
    """Nonparametric bootstrap SE and 95% Wald interval around the point estimate."""
    if config.bootstrap_reps < 2:
        raise ConfigError("bootstrap needs at least 2 resamples")
    if point is None:
        point = estimate(cohort, link, config, method, workers, stream)
    task = partial(_bootstrap_rep, cohort=cohort, link=link, config=config, method=Method(method),
                   stream=stream)
    reps = np.stack(parallel_map(task, range(config.bootstrap_reps), workers))
    ok = np.all(np.isfinite(reps), axis=1)
    failed = int((~ok).sum())
    if ok.sum() < 2:
        raise ResampleError(f"only {int(ok.sum())} bootstrap resamples produced an estimate")
    if failed:
        warn(f"{failed}/{config.bootstrap_reps} bootstrap resamples failed and were skipped")
    se = reps[ok].std(axis=0, ddof=1)
    return BootstrapResult(point, se, point - Z_975 * se, point + Z_975 * se, reps, failed)


# ---------- full pipeline ----------

class FitReport(BaseModel):
    link: str
    n: int
    p: int
    n_events: int
    beta_naive: List[float]
    naive_converged: bool
    beta_simex: List[float]
    se: List[float]
    ci_lower: List[float]
    ci_upper: List[float]
    zeta_grid: List[float]
    beta_path: List[List[float]]
    gamma: List[List[float]]
    dropped_fits: int
    H: List[Tuple[float, float]] = Field(default_factory=list)
    H_max_adjustment: float = 0.0
    bootstrap_reps: int = 0
    bootstrap_failed: int = 0


def simex_fit(
    cohort: Cohort,
    link: TransformationLink,
    config: SimexConfig,
    workers: int = 1,
) -> Tuple[FitReport, SimexPath, HExtrapolation]:
    """Naive fit, SIMEX beta, SIMEX H and (if configured) bootstrap SE/CI for one cohort."""
    design = RiskDesign.build(cohort, config.solver.weight_scale)
    naive = fit_naive(cohort, link, config.solver, design)
    info(f"naive fit: beta={np.round(naive.beta, 4).tolist()} converged={naive.converged}")
    path, ext = simex_beta(cohort, link, config, workers, design=design)
    beta = ext.predicted_at_minus_one
    info(f"SIMEX beta={np.round(beta, 4).tolist()} (dropped fits: {path.dropped_fits})")
    Hx = simex_H_detail(cohort, link, config, beta, workers, design=design)
    nan = [float("nan")] * cohort.p
    se, lo, hi, failed = nan, nan, nan, 0
    if config.bootstrap_reps >= 2:
        boot = bootstrap_ci(cohort, link, config, Method.SIMEX, workers, point=beta)
        se, lo, hi, failed = boot.se.tolist(), boot.lower.tolist(), boot.upper.tolist(), boot.failed
    report = FitReport(
        link=link.name,
        n=cohort.n,
        p=cohort.p,
        n_events=cohort.n_events,
        beta_naive=naive.beta.tolist(),
        naive_converged=naive.converged,
        beta_simex=beta.tolist(),
        se=se,
        ci_lower=lo,
        ci_upper=hi,
        zeta_grid=list(config.zeta_grid),
        beta_path=path.beta_by_zeta.tolist(),
        gamma=ext.Gamma.tolist(),
        dropped_fits=path.dropped_fits,
        H=Hx.H.pairs(),
        H_max_adjustment=Hx.max_adjustment,
        bootstrap_reps=config.bootstrap_reps,
        bootstrap_failed=failed,
    )
    return report, path, Hx
