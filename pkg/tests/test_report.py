import json

import pytest

from lbsimex.errors import InvalidArgumentError, ReportIOError
from lbsimex.report import SensitivityRow, SummaryRow, emit_report, load_report_json, to_frame


def _summary(method="simex", sigma=0.5):
    return SummaryRow(
        model="ph", censoring_rate=0.25, sigma_eta=sigma, method=method, n=200, reps=200,
        bias=[0.025, 0.011], var=[0.025, 0.027], mse=[0.026, 0.028], cp=[94.5, 94.5],
    )


def _sensitivity():
    return [
        SensitivityRow(model="ph", sigma_e=None, method="naive",
                       est=[0.1, -0.02], se=[0.03, 0.01], p_value=[0.0009, 0.05]),
        SensitivityRow(model="ph", sigma_e=0.15, method="simex",
                       est=[0.12, -0.03], se=[0.04, 0.012], p_value=[0.003, 0.01]),
    ]


def test_one_summary_row_is_a_two_line_csv(tmp_path):
    path = emit_report([_summary()], "csv", tmp_path / "t.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[0] == ("model,censoring_rate,sigma_eta,method,n,reps,"
                        "regenerated_invalid,regenerated_numerical,"
                        "bias_1,bias_2,var_1,var_2,mse_1,mse_2,cp_1,cp_2")


def test_json_reports_load_back(tmp_path):
    rows = [_summary("naive"), _summary("simex"), _summary("true")]
    path = emit_report(rows, "json", tmp_path / "t.json")
    assert json.loads(path.read_text(encoding="utf-8"))["kind"] == "summary"
    assert load_report_json(path) == rows
    sens = _sensitivity()
    assert load_report_json(emit_report(sens, "json", tmp_path / "s.json")) == sens


def test_markdown_has_one_line_per_method_and_sigma(tmp_path):
    rows = [_summary(m, s) for s in (0.01, 0.5) for m in ("naive", "simex")]
    text = emit_report(rows, "md", tmp_path / "t.md").read_text(encoding="utf-8")
    body = [line for line in text.splitlines() if line.startswith("| PH")]
    assert len(body) == 4
    assert "Bias β1" in text.splitlines()[0]
    assert "| 94.5 |" in text


def test_sensitivity_csv_leaves_sigma_e_empty_on_the_naive_row(tmp_path):
    lines = emit_report(_sensitivity(), "csv", tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("model,sigma_e,method,est_1,est_2,se_1,se_2")
    assert lines[1].startswith("ph,,naive,")


def test_frame_flattens_vectors():
    frame = to_frame([_summary()])
    assert frame.loc[0, "cp_2"] == 94.5


def test_empty_or_mixed_rows_are_rejected(tmp_path):
    with pytest.raises(InvalidArgumentError):
        emit_report([], "csv", tmp_path / "t.csv")
    with pytest.raises(InvalidArgumentError):
        emit_report([_summary(), *_sensitivity()], "csv", tmp_path / "t.csv")


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportIOError):
        emit_report([_summary()], "csv", blocker / "t.csv")


def test_unknown_json_is_rejected(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"kind": "other", "rows": []}')
    with pytest.raises(ReportIOError):
        load_report_json(path)
    path.write_text("not json")
    with pytest.raises(ReportIOError):
        load_report_json(path)
