from __future__ import annotations
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np
import pandas as pd
import typer
from pydantic import ValidationError
from rich import print as rprint

from .config import Method, Profile, SimScenario, load_profile
from .datagen import calibrate_censoring, draw_prevalent_cohort
from .errors import (
    EXIT_IO,
    EXIT_VALIDATION,
    ConfigError,
    DataIOError,
    LbsimexError,
)
from .harness import run_simulation_grid, sensitivity_analysis
from .ingest import load_cohort_csv, write_cohort_csv
from .links import LinkKind, TransformationLink
from .logging import configure, err, info
from .montecarlo import Stream, stream_key, substream
from .report import ReportFormat, emit_report
from .simex import HExtrapolation, SimexPath, simex_fit
from .survival import WeightScale

app = typer.Typer(add_completion=False, help="SIMEX estimation for length-biased data with covariate measurement error.")
_WEIGHT_HELP = "Risk-set weighting: delayed (default), residual or onset"


@app.callback()
def main(
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only warnings and errors"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Solver and SIMEX diagnostics"),
):
    configure(quiet=quiet, verbose=verbose)


@contextmanager
def _guard() -> Iterator[None]:
    try:
        yield
    except LbsimexError as e:
        err(str(e))
        raise typer.Exit(e.exit_code)
    except ValidationError as e:
        err(f"invalid configuration: {e.errors()[0].get('msg', e)}")
        raise typer.Exit(EXIT_VALIDATION)
    except ValueError as e:
        err(str(e))
        raise typer.Exit(EXIT_VALIDATION)
    except OSError as e:
        err(str(e))
        raise typer.Exit(EXIT_IO)


def _profile(profile: Optional[str], local_config: Optional[str]) -> Profile:
    if local_config and not Path(local_config).exists():
        raise DataIOError(f"no such config file: {local_config}")
    return load_profile(profile, Path(local_config) if local_config else Path(".lbsimex.toml"))


def _floats(text: Optional[str], default: List[float]) -> List[float]:
    if text is None:
        return default
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got '{text}'")


def _apply(p: Profile, **overrides) -> Profile:
    return p.model_copy(update={k: v for k, v in overrides.items() if v is not None})


def _scenario(p: Profile, link: LinkKind, censoring: float, sigma_eta: float) -> SimScenario:
    return SimScenario(link=link, target_censoring=censoring, sigma_eta=sigma_eta, n=p.n)


def _error_cov(sigma_eta: Optional[float], matrix: Optional[str], p: int) -> np.ndarray:
    if matrix:
        try:
            S = np.loadtxt(matrix, delimiter=",", ndmin=2)
        except (OSError, ValueError) as e:
            raise DataIOError(f"cannot read covariance matrix {matrix}: {e}") from e
        return S
    if sigma_eta is None:
        raise ConfigError("fit needs --sigma-eta or --sigma-eta-matrix")
    return sigma_eta * np.eye(p)


def _write_curves(out_dir: Path, path: SimexPath, beta_simex: List[float], Hx: HExtrapolation) -> None:
    """beta_path.csv holds the averaged (zeta, beta) path plus the extrapolated row at zeta = -1."""
    out_dir.mkdir(parents=True, exist_ok=True)
    betas = np.vstack([path.beta_by_zeta, np.asarray(beta_simex)[None, :]])
    frame = pd.DataFrame(betas, columns=[f"beta_{j + 1}" for j in range(betas.shape[1])])
    frame.insert(0, "zeta", np.append(path.zeta_grid, -1.0))
    frame.to_csv(out_dir / "beta_path.csv", index=False, float_format="%.10g")
    pd.DataFrame({
        "t": Hx.H.event_times,
        "H": Hx.H.values,
        "H_unrepaired": Hx.raw,
    }).to_csv(out_dir / "H_simex.csv", index=False, float_format="%.10g")


@app.command()
def simulate(
    model: str = typer.Option(None, "--model", help="ph|po, or a comma list"),
    censoring: str = typer.Option(None, "--censoring", help="Target censoring rate(s), e.g. 0.25,0.5"),
    sigma_eta: str = typer.Option(None, "--sigma-eta", help="Measurement-error variance(s), e.g. 0.01,0.5"),
    n: int = typer.Option(None, "--n"),
    reps: int = typer.Option(None, "--reps"),
    B: int = typer.Option(None, "--B"),
    zeta_max: float = typer.Option(None, "--zeta-max"),
    zeta_step: float = typer.Option(None, "--zeta-step"),
    boot: int = typer.Option(None, "--boot", help="Bootstrap resamples per replicate"),
    seed: int = typer.Option(None, "--seed"),
    methods: str = typer.Option(None, "--methods", help="Comma list of naive,simex,true"),
    weight_scale: WeightScale = typer.Option(None, "--weight-scale", help=_WEIGHT_HELP),
    out: str = typer.Option("table.csv", "--out"),
    format: ReportFormat = typer.Option(ReportFormat.CSV, "--format"),
    workers: int = typer.Option(None, "--workers"),
    profile: str = typer.Option(None, help="Profile name (desk, full, ...)"),
    local_config: str = typer.Option(None, "--config", help="Project-local .lbsimex.toml"),
):
    """Run the simulation study and write the Bias/Var/MSE/CP table."""
    with _guard():
        p = _apply(
            _profile(profile, local_config),
            n=n, reps=reps, B=B, zeta_max=zeta_max, zeta_step=zeta_step, bootstrap_reps=boot,
            seed=seed, weight_scale=weight_scale, workers=workers,
        )
        links = [LinkKind(m.strip()) for m in model.split(",")] if model else [p.model]
        wanted = [Method(m.strip()) for m in methods.split(",")] if methods else p.methods
        rows = run_simulation_grid(
            _scenario(p, links[0], 0.25, 0.0),
            links,
            _floats(censoring, p.censoring),
            _floats(sigma_eta, p.sigma_eta),
            wanted,
            p.reps,
            p.simex_config(),
            p.seed,
            p.workers,
        )
        path = emit_report(rows, format, Path(out))
        info(f"Written {format.value.upper()} to {path}")


@app.command()
def fit(
    data: str = typer.Option(..., "--data", help="Cohort CSV"),
    model: LinkKind = typer.Option(None, "--model"),
    sigma_eta: float = typer.Option(None, "--sigma-eta", help="Diagonal measurement-error variance"),
    sigma_eta_matrix: str = typer.Option(None, "--sigma-eta-matrix", help="CSV file with the full covariance"),
    B: int = typer.Option(None, "--B"),
    zeta_max: float = typer.Option(None, "--zeta-max"),
    zeta_step: float = typer.Option(None, "--zeta-step"),
    seed: int = typer.Option(None, "--seed"),
    boot: int = typer.Option(None, "--boot"),
    weight_scale: WeightScale = typer.Option(None, "--weight-scale", help=_WEIGHT_HELP),
    out: str = typer.Option("fit.json", "--out"),
    curves_dir: str = typer.Option(None, "--curves-dir", help="Also write beta_path.csv and H_simex.csv here"),
    workers: int = typer.Option(None, "--workers"),
    profile: str = typer.Option(None),
    local_config: str = typer.Option(None, "--config"),
):
    """SIMEX fit of one cohort: beta, bootstrap SE/CI and the (t, H) curve."""
    with _guard():
        p = _apply(
            _profile(profile, local_config),
            model=model, B=B, zeta_max=zeta_max, zeta_step=zeta_step, seed=seed,
            bootstrap_reps=boot, weight_scale=weight_scale, workers=workers,
        )
        cohort = load_cohort_csv(Path(data), p.csv)
        config = p.simex_config(_error_cov(sigma_eta, sigma_eta_matrix, cohort.p))
        report, path, Hx = simex_fit(cohort, TransformationLink.of(p.model), config, p.workers)
        out_path = Path(out)
        try:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            out_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
            if curves_dir:
                _write_curves(Path(curves_dir), path, report.beta_simex, Hx)
        except OSError as e:
            raise DataIOError(f"cannot write results: {e}") from e
        rprint({"beta_simex": report.beta_simex, "se": report.se, "dropped_fits": report.dropped_fits})
        info(f"Written JSON to {out_path}")


@app.command()
def sensitivity(
    data: str = typer.Option(..., "--data", help="Cohort CSV"),
    model: str = typer.Option(None, "--model", help="ph|po, or a comma list"),
    sigma_e: str = typer.Option(None, "--sigma-e", help="Comma list of sigma_e values in [0, 1]"),
    B: int = typer.Option(None, "--B"),
    seed: int = typer.Option(None, "--seed"),
    boot: int = typer.Option(None, "--boot"),
    weight_scale: WeightScale = typer.Option(None, "--weight-scale", help=_WEIGHT_HELP),
    out: str = typer.Option("table.csv", "--out"),
    format: ReportFormat = typer.Option(ReportFormat.CSV, "--format"),
    workers: int = typer.Option(None, "--workers"),
    profile: str = typer.Option(None),
    local_config: str = typer.Option(None, "--config"),
):
    """Sensitivity table: naive plus SIMEX under Sigma_eta = cov(W) + sigma_e I."""
    with _guard():
        p = _apply(
            _profile(profile, local_config),
            B=B, seed=seed, bootstrap_reps=boot, weight_scale=weight_scale, workers=workers,
        )
        cohort = load_cohort_csv(Path(data), p.csv)
        links = [LinkKind(m.strip()) for m in model.split(",")] if model else [p.model]
        rows = []
        for link in links:
            rows += sensitivity_analysis(
                cohort, TransformationLink.of(link), _floats(sigma_e, p.sigma_e), p.simex_config(), p.workers
            )
        path = emit_report(rows, format, Path(out))
        info(f"Written {format.value.upper()} to {path}")


@app.command("gen-data")
def gen_data(
    model: LinkKind = typer.Option(None, "--model"),
    censoring: float = typer.Option(None, "--censoring"),
    sigma_eta: float = typer.Option(None, "--sigma-eta"),
    n: int = typer.Option(None, "--n"),
    seed: int = typer.Option(None, "--seed"),
    c: float = typer.Option(None, "--c", help="Censoring bound; calibrated from --censoring when omitted"),
    with_truth: bool = typer.Option(False, "--with-truth", help="Also write x1..xp"),
    out: str = typer.Option("cohort.csv", "--out"),
    profile: str = typer.Option(None),
    local_config: str = typer.Option(None, "--config"),
):
    """Draw one synthetic prevalent cohort and write it as CSV."""
    with _guard():
        p = _apply(_profile(profile, local_config), model=model, n=n, seed=seed)
        scenario = _scenario(
            p, p.model,
            censoring if censoring is not None else p.censoring[0],
            sigma_eta if sigma_eta is not None else p.sigma_eta[0],
        )
        bound = c if c is not None else calibrate_censoring(scenario, seed=p.seed)
        rng = substream(p.seed, *stream_key(Stream.COHORT, 0, 0))
        cohort = draw_prevalent_cohort(scenario, bound, rng)
        path = write_cohort_csv(cohort, Path(out), with_truth=with_truth)
        info(f"Written {cohort.n} subjects ({cohort.n - cohort.n_events} censored, c={bound:.4g}) to {path}")


@app.command()
def calibrate(
    model: LinkKind = typer.Option(None, "--model"),
    censoring: float = typer.Option(None, "--censoring"),
    seed: int = typer.Option(None, "--seed"),
    pilot: int = typer.Option(100_000, "--pilot", help="Enrolled subjects in the pilot sample"),
    profile: str = typer.Option(None),
    local_config: str = typer.Option(None, "--config"),
):
    """Print the censoring bound c that yields the target censoring rate."""
    with _guard():
        p = _apply(_profile(profile, local_config), model=model, seed=seed)
        rate = censoring if censoring is not None else p.censoring[0]
        scenario = _scenario(p, p.model, rate, 0.0)
        bound = calibrate_censoring(scenario, rate, seed=p.seed, pilot=pilot)
        rprint({"model": p.model.value, "censoring": rate, "c": bound})


if __name__ == "__main__":
    app()
