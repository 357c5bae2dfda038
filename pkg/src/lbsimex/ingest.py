"""Cohort CSV files.

Library schema: ``id, trunc_time, obs_time, status, w1..wp[, x1..xp]``. A
``CsvSchema`` maps other column names (e.g. WHAS-style ``los, lenfol, fstat``)
onto it. Errors name the file line (header is line 1).
"""
from __future__ import annotations
import re
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from .config import CsvSchema
from .errors import CohortValidationError, DataIOError, Violation
from .logging import debug
from .survival import Cohort

_W_COL = re.compile(r"^w(\d+)$")
_X_COL = re.compile(r"^x(\d+)$")


def _numbered(columns: List[str], pattern: re.Pattern) -> List[str]:
    hits = [(int(m.group(1)), c) for c in columns if (m := pattern.match(c))]
    return [c for _, c in sorted(hits)]


def _line(i: int) -> int:
    return i + 2


def _numeric(df: pd.DataFrame, cols: List[str], violations: List[Violation]) -> np.ndarray:
    out = df[cols].apply(pd.to_numeric, errors="coerce")
    raw = df[cols]
    bad = out.isna() & (raw.apply(lambda s: s.str.strip()) != "")
    for i, col in zip(*np.nonzero(bad.to_numpy())):
        violations.append(Violation(
            int(i), "non_numeric",
            f"non-numeric value {raw.iat[i, col]!r} in column '{cols[col]}' (line {_line(int(i))})",
        ))
    return out.to_numpy(dtype=float)


def load_cohort_csv(path: Path, schema: Optional[CsvSchema] = None) -> Cohort:
    schema = schema or CsvSchema()
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as e:
        raise DataIOError(f"no such file: {path}") from e
    except pd.errors.EmptyDataError:
        raise CohortValidationError([Violation(None, "empty", "file has no header or rows")], str(path))
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataIOError(f"cannot parse {path}: {e}") from e
    df.columns = [str(c).strip() for c in df.columns]
    columns = list(df.columns)

    covariates = schema.covariates or _numbered(columns, _W_COL)
    truth = schema.truth if schema.truth is not None else _numbered(columns, _X_COL)
    required = [schema.trunc_time, schema.obs_time, schema.status, *covariates, *truth]
    missing = [c for c in required if c not in columns]
    if not covariates:
        missing.append("w1")
    if missing:
        raise CohortValidationError(
            [Violation(None, "missing_column", f"missing column '{c}' (line 1)") for c in missing],
            str(path),
        )
    if df.empty:
        raise CohortValidationError([Violation(None, "empty", "cohort has no subjects")], str(path))

    violations: List[Violation] = []
    times = _numeric(df, [schema.trunc_time, schema.obs_time, schema.status], violations)
    W = _numeric(df, covariates, violations)
    X = _numeric(df, truth, violations) if truth else None
    if violations:
        raise CohortValidationError(violations, str(path))
    if truth and len(truth) != len(covariates):
        raise CohortValidationError(
            [Violation(None, "dimension", f"{len(truth)} truth columns for {len(covariates)} covariates")],
            str(path),
        )
    ids = df[schema.id].tolist() if schema.id and schema.id in columns else None
    try:
        cohort = Cohort.from_arrays(times[:, 0], times[:, 1], times[:, 2], W, X, ids)
    except CohortValidationError as e:
        raise CohortValidationError(
            [Violation(v.row, v.rule, v.message if v.row is None else f"{v.message} (line {_line(v.row)})")
             for v in e.violations],
            str(path),
        ) from None
    debug(f"loaded {cohort.n} subjects ({cohort.n_events} events, p={cohort.p}) from {path}")
    return cohort


def write_cohort_csv(cohort: Cohort, path: Path, with_truth: bool = False) -> Path:
    """Write ``cohort`` in the library schema; truth columns only when requested and present."""
    path = Path(path)
    data = {
        "id": cohort.ids if cohort.ids is not None else [str(i + 1) for i in range(cohort.n)],
        "trunc_time": cohort.trunc_time,
        "obs_time": cohort.obs_time,
        "status": cohort.status.astype(int),
    }
    for j in range(cohort.p):
        data[f"w{j + 1}"] = cohort.W[:, j]
    if with_truth and cohort.X is not None:
        for j in range(cohort.p):
            data[f"x{j + 1}"] = cohort.X[:, j]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(data).to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise DataIOError(f"cannot write {path}: {e}") from e
    return path
