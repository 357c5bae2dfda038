"""Simulation study and sensitivity analysis drivers."""
from __future__ import annotations
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .config import Method, SimexConfig, SimScenario
from .datagen import calibrate_censoring, draw_prevalent_cohort
from .errors import CohortValidationError, InvalidArgumentError, NumericalError, ScenarioInfeasibleError
from .links import LinkKind, TransformationLink
from .logging import info, progress, warn
from .montecarlo import Stream, parallel_map, stream_key, substream
from .report import SensitivityRow, SummaryRow
from .simex import bootstrap_ci
from .survival import Cohort

# attempts per replicate before the scenario is declared infeasible
MAX_REGENERATIONS = 100
HEALTH_THRESHOLD = 0.05


@dataclass
class Replicate:
    estimates: Dict[Method, np.ndarray]
    lower: Dict[Method, np.ndarray]
    upper: Dict[Method, np.ndarray]
    regenerated_invalid: int = 0      # cohorts rejected by validation
    regenerated_numerical: int = 0    # numerical failures or non-finite estimates


def _replicate(
    r: int,
    scenario: SimScenario,
    c: float,
    methods: Tuple[Method, ...],
    config: SimexConfig,
    seed: int,
) -> Replicate:
    link = TransformationLink.of(scenario.link)
    invalid = numerical = 0
    for attempt in range(MAX_REGENERATIONS):
        try:
            rng = substream(seed, *stream_key(Stream.COHORT, r, attempt))
            cohort = draw_prevalent_cohort(scenario, c, rng)
            stream = stream_key(Stream.SIMEX, r, attempt)
            boots = {m: bootstrap_ci(cohort, link, config, m, 1, stream) for m in methods}
        except ScenarioInfeasibleError:
            raise
        except CohortValidationError:
            invalid += 1
            continue
        except NumericalError:
            numerical += 1
            continue
        if not all(np.all(np.isfinite(b.estimate)) for b in boots.values()):
            numerical += 1
            continue
        return Replicate(
            {m: b.estimate for m, b in boots.items()},
            {m: b.lower for m, b in boots.items()},
            {m: b.upper for m, b in boots.items()},
            invalid,
            numerical,
        )
    raise ScenarioInfeasibleError(f"replicate {r} failed {MAX_REGENERATIONS} times")


def summarize(
    estimates: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    beta0: Sequence[float],
) -> Dict[str, List[float]]:
    """Bias, Var (n - 1 divisor), MSE and CP (percent, exact cover count / reps) per coordinate."""
    b0 = np.asarray(beta0, dtype=float)
    reps = estimates.shape[0]
    cover = ((lower <= b0) & (b0 <= upper)).sum(axis=0)
    return {
        "bias": (estimates.mean(axis=0) - b0).tolist(),
        "var": estimates.var(axis=0, ddof=1).tolist(),
        "mse": ((estimates - b0) ** 2).mean(axis=0).tolist(),
        "cp": (100.0 * cover / reps).tolist(),
    }


def run_simulation(
    scenario: SimScenario,
    methods: Sequence[Method],
    reps: int,
    simex_config: SimexConfig,
    rng_seed: int,
    workers: int = 1,
    c: Optional[float] = None,
) -> List[SummaryRow]:
    if reps < 2:
        raise InvalidArgumentError("reps must be at least 2")
    methods = tuple(Method(m) for m in methods)
    if not methods:
        raise InvalidArgumentError("no methods requested")
    if c is None:
        c = calibrate_censoring(scenario, seed=rng_seed)
    config = simex_config.with_cov(scenario.error_cov)
    info(
        f"{scenario.link.value.upper()} censoring={scenario.target_censoring:g} "
        f"sigma_eta={scenario.sigma_eta:g}: {reps} replicates, c={c:.4g}"
    )
    task = partial(_replicate, scenario=scenario, c=c, methods=methods, config=config, seed=rng_seed)
    with progress() as bar:
        job = bar.add_task("replicates", total=reps)
        results = parallel_map(task, range(reps), workers, on_result=lambda _: bar.advance(job))

    invalid = sum(res.regenerated_invalid for res in results)
    numerical = sum(res.regenerated_numerical for res in results)
    if invalid + numerical > HEALTH_THRESHOLD * reps:
        warn(
            f"scenario health: {invalid + numerical} regenerated cohorts for {reps} replicates "
            f"({invalid} invalid, {numerical} numerical)"
        )
    rows = []
    for m in methods:
        stats = summarize(
            np.stack([res.estimates[m] for res in results]),
            np.stack([res.lower[m] for res in results]),
            np.stack([res.upper[m] for res in results]),
            scenario.beta0,
        )
        rows.append(SummaryRow(
            model=scenario.link.value,
            censoring_rate=scenario.target_censoring,
            sigma_eta=scenario.sigma_eta,
            method=m.value,
            n=scenario.n,
            reps=reps,
            regenerated_invalid=invalid,
            regenerated_numerical=numerical,
            **stats,
        ))
    return rows


def run_simulation_grid(
    base: SimScenario,
    links: Sequence[LinkKind],
    censoring_rates: Sequence[float],
    sigma_etas: Sequence[float],
    methods: Sequence[Method],
    reps: int,
    simex_config: SimexConfig,
    rng_seed: int,
    workers: int = 1,
) -> List[SummaryRow]:
    """Rows for every link x censoring rate x sigma_eta; c is calibrated once per link and rate."""
    rows: List[SummaryRow] = []
    for link in links:
        for rate in censoring_rates:
            c: Optional[float] = None
            for s in sigma_etas:
                scenario = base.model_copy(
                    update={"link": LinkKind(link), "target_censoring": rate, "sigma_eta": s}
                )
                if c is None:
                    c = calibrate_censoring(scenario, seed=rng_seed)
                rows += run_simulation(scenario, methods, reps, simex_config, rng_seed, workers, c)
    return rows


def _p_values(est: np.ndarray, se: np.ndarray) -> List[float]:
    return (2.0 * norm.sf(np.abs(est / se))).tolist()


def sensitivity_analysis(
    cohort: Cohort,
    link: TransformationLink,
    sigma_e_grid: Sequence[float],
    simex_config: SimexConfig,
    workers: int = 1,
    base_cov: Optional[np.ndarray] = None,
) -> List[SensitivityRow]:
    """Naive row plus one SIMEX row per sigma_e, with Sigma_eta = Sigma + sigma_e I.

    Sigma is the sample covariance of the surrogate unless ``base_cov`` is given.
    """
    for s in sigma_e_grid:
        if not 0.0 <= s <= 1.0:
            raise InvalidArgumentError(f"sigma_e must lie in [0, 1], got {s}")
    if base_cov is None:
        Sigma = np.atleast_2d(np.cov(cohort.W, rowvar=False))
    else:
        Sigma = np.atleast_2d(np.asarray(base_cov, dtype=float))
    eye = np.eye(cohort.p)

    naive = bootstrap_ci(cohort, link, simex_config, Method.NAIVE, workers)
    rows = [SensitivityRow(
        model=link.kind.value, sigma_e=None, method=Method.NAIVE.value,
        est=naive.estimate.tolist(), se=naive.se.tolist(),
        p_value=_p_values(naive.estimate, naive.se),
    )]
    for s in sigma_e_grid:
        config = simex_config.with_cov(Sigma + s * eye)
        boot = bootstrap_ci(cohort, link, config, Method.SIMEX, workers)
        info(f"sigma_e={s:g}: SIMEX beta={np.round(boot.estimate, 4).tolist()}")
        rows.append(SensitivityRow(
            model=link.kind.value, sigma_e=float(s), method=Method.SIMEX.value,
            est=boot.estimate.tolist(), se=boot.se.tolist(),
            p_value=_p_values(boot.estimate, boot.se),
        ))
    return rows
