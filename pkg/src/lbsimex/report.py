"""Result tables: simulation summaries and sensitivity analyses.

CSV columns are fixed. Summary rows flatten to
``model, censoring_rate, sigma_eta, method, n, reps, regenerated_invalid,
regenerated_numerical, bias_1..p, var_1..p, mse_1..p, cp_1..p`` and sensitivity rows to
``model, sigma_e, method, est_1..p, se_1..p, p_value_1..p`` (``sigma_e`` is
empty on the naive row). JSON holds ``{"kind": ..., "rows": [...]}``.
"""
from __future__ import annotations
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from .errors import InvalidArgumentError, ReportIOError


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"
    MD = "md"


class SummaryRow(BaseModel):
    model: str
    censoring_rate: float
    sigma_eta: float
    method: str
    n: int
    reps: int
    regenerated_invalid: int = 0     # cohorts that failed validation
    regenerated_numerical: int = 0   # numerical failures
    bias: List[float]
    var: List[float]
    mse: List[float]
    cp: List[float]             # percent


class SensitivityRow(BaseModel):
    model: str
    sigma_e: Optional[float]    # None on the naive row
    method: str
    est: List[float]
    se: List[float]
    p_value: List[float]


Row = Union[SummaryRow, SensitivityRow]
_VECTORS = {
    SummaryRow: ("bias", "var", "mse", "cp"),
    SensitivityRow: ("est", "se", "p_value"),
}


def _kind(rows: Sequence[Row]) -> type:
    if not rows:
        raise InvalidArgumentError("nothing to report")
    kinds = {type(r) for r in rows}
    if len(kinds) != 1:
        raise InvalidArgumentError("cannot mix summary and sensitivity rows in one report")
    return kinds.pop()


def _flat(row: Row) -> Dict[str, Any]:
    data = row.model_dump()
    out: Dict[str, Any] = {}
    for k, v in data.items():
        if isinstance(v, list):
            out.update({f"{k}_{j + 1}": x for j, x in enumerate(v)})
        else:
            out[k] = v
    return out


def to_frame(rows: Sequence[Row]) -> pd.DataFrame:
    _kind(rows)
    return pd.DataFrame([_flat(r) for r in rows])


def _num(x: Any) -> str:
    return "" if x is None else f"{x:.3f}"


def _markdown(rows: Sequence[Row]) -> str:
    kind = _kind(rows)
    p = len(getattr(rows[0], _VECTORS[kind][0]))
    if kind is SummaryRow:
        keys = ["Model", "Censoring", "σ_η", "Method"]
        stats = [("Bias", "bias"), ("Var", "var"), ("MSE", "mse"), ("CP", "cp")]
    else:
        keys = ["Model", "σ_e", "Method"]
        stats = [("EST", "est"), ("SE", "se"), ("p-value", "p_value")]
    head = keys + [f"{label} β{j + 1}" for label, _ in stats for j in range(p)]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows:
        if isinstance(r, SummaryRow):
            cells = [r.model.upper(), f"{100 * r.censoring_rate:g}%", f"{r.sigma_eta:g}", r.method]
            vals = [f"{x:.1f}" if attr == "cp" else _num(x)
                    for _, attr in stats for x in getattr(r, attr)]
        else:
            cells = [r.model.upper(), "" if r.sigma_e is None else f"{r.sigma_e:g}", r.method]
            vals = [_num(x) for _, attr in stats for x in getattr(r, attr)]
        lines.append("| " + " | ".join(cells + vals) + " |")
    return "\n".join(lines) + "\n"


def emit_report(rows: Sequence[Row], fmt: Union[str, ReportFormat], path: Path) -> Path:
    fmt = ReportFormat(fmt)
    kind = _kind(rows)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt is ReportFormat.CSV:
            to_frame(rows).to_csv(path, index=False, float_format="%.10g")
        elif fmt is ReportFormat.JSON:
            payload = {
                "kind": "summary" if kind is SummaryRow else "sensitivity",
                "rows": [r.model_dump() for r in rows],
            }
            path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        else:
            path.write_text(_markdown(rows), encoding="utf-8")
    except OSError as e:
        raise ReportIOError(f"cannot write report {path}: {e}") from e
    return path


def load_report_json(path: Path) -> List[Row]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ReportIOError(f"cannot read report {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ReportIOError(f"{path} is not a JSON report: {e}") from e
    kind = payload.get("kind") if isinstance(payload, dict) else None
    model = {"summary": SummaryRow, "sensitivity": SensitivityRow}.get(kind)
    if model is None:
        raise ReportIOError(f"{path}: unknown report kind {kind!r}")
    try:
        return [model.model_validate(r) for r in payload.get("rows", [])]
    except ValidationError as e:
        raise ReportIOError(f"{path}: malformed row: {e}") from e
