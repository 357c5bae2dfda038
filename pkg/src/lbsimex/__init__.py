from .version import __version__
from .config import SimexConfig, SimScenario, SolverOptions
from .links import PH, PO, LinkKind, TransformationLink
from .survival import Cohort, StepSurvivor, WeightScale, km_censoring_survivor, validate_cohort
from .estimator import FitResult, MonotoneStep, fit_naive, fit_true, profile_H, score, solve_beta
from .simex import bootstrap_ci, contaminate, fit_extrapolant, simex_beta, simex_fit, simex_H
from .datagen import add_measurement_error, calibrate_censoring, draw_prevalent_cohort
from .harness import run_simulation, run_simulation_grid, sensitivity_analysis
from .ingest import load_cohort_csv, write_cohort_csv
from .report import SensitivityRow, SummaryRow, emit_report, load_report_json

__all__ = [
    "__version__",
    "SimexConfig", "SimScenario", "SolverOptions",
    "PH", "PO", "LinkKind", "TransformationLink",
    "Cohort", "StepSurvivor", "WeightScale", "km_censoring_survivor", "validate_cohort",
    "FitResult", "MonotoneStep", "fit_naive", "fit_true", "profile_H", "score", "solve_beta",
    "bootstrap_ci", "contaminate", "fit_extrapolant", "simex_beta", "simex_fit", "simex_H",
    "add_measurement_error", "calibrate_censoring", "draw_prevalent_cohort",
    "run_simulation", "run_simulation_grid", "sensitivity_analysis",
    "load_cohort_csv", "write_cohort_csv",
    "SensitivityRow", "SummaryRow", "emit_report", "load_report_json",
]
