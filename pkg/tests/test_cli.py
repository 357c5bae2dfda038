import json

import pytest
from typer.testing import CliRunner

from lbsimex.cli import app

runner = CliRunner()


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("LBSIMEX_PROFILE", raising=False)
    monkeypatch.delenv("LBSIMEX_WORKERS", raising=False)
    return tmp_path


@pytest.fixture
def cohort_csv(workdir):
    res = runner.invoke(app, ["-q", "gen-data", "--n", "80", "--c", "2.0", "--seed", "5",
                              "--with-truth", "--out", "cohort.csv"])
    assert res.exit_code == 0, res.output
    return workdir / "cohort.csv"


def test_gen_data_writes_the_library_schema(cohort_csv):
    lines = cohort_csv.read_text().splitlines()
    assert lines[0] == "id,trunc_time,obs_time,status,w1,w2,x1,x2"
    assert len(lines) == 81


def test_fit_writes_json_and_curves(cohort_csv, workdir):
    res = runner.invoke(app, ["-q", "fit", "--data", str(cohort_csv), "--sigma-eta", "0.5",
                              "--B", "3", "--boot", "0", "--out", "fit.json", "--curves-dir", "curves"])
    assert res.exit_code == 0, res.output
    report = json.loads((workdir / "fit.json").read_text())
    assert len(report["beta_simex"]) == 2
    assert len(report["beta_path"]) == 9
    assert all(h1 <= h2 for (_, h1), (_, h2) in zip(report["H"], report["H"][1:]))
    path_lines = (workdir / "curves" / "beta_path.csv").read_text().splitlines()
    assert path_lines[0] == "zeta,beta_1,beta_2"
    assert path_lines[-1].startswith("-1,")
    assert (workdir / "curves" / "H_simex.csv").exists()


def test_fit_without_error_covariance_is_a_validation_error(cohort_csv):
    res = runner.invoke(app, ["fit", "--data", str(cohort_csv)])
    assert res.exit_code == 2


def test_missing_data_file_is_an_io_error(workdir):
    res = runner.invoke(app, ["fit", "--data", "missing.csv", "--sigma-eta", "0.5"])
    assert res.exit_code == 4


def test_invalid_cohort_is_a_validation_error(workdir):
    (workdir / "bad.csv").write_text("trunc_time,obs_time,status,w1\n2.0,1.0,1,0.0\n")
    res = runner.invoke(app, ["fit", "--data", "bad.csv", "--sigma-eta", "0.5"])
    assert res.exit_code == 2


def test_unknown_model_is_rejected(cohort_csv):
    res = runner.invoke(app, ["fit", "--data", str(cohort_csv), "--model", "aft", "--sigma-eta", "0.5"])
    assert res.exit_code == 2


def test_simulate_is_byte_identical_across_worker_counts(workdir):
    args = ["-q", "simulate", "--n", "50", "--reps", "4", "--B", "2", "--boot", "2",
            "--methods", "naive,simex,true", "--censoring", "0.25", "--sigma-eta", "0.5",
            "--seed", "3"]
    one = runner.invoke(app, [*args, "--workers", "1", "--out", "one.csv"])
    eight = runner.invoke(app, [*args, "--workers", "8", "--out", "eight.csv"])
    assert one.exit_code == 0, one.output
    assert eight.exit_code == 0, eight.output
    assert (workdir / "one.csv").read_bytes() == (workdir / "eight.csv").read_bytes()
    lines = (workdir / "one.csv").read_text().splitlines()
    assert [line.split(",")[3] for line in lines[1:]] == ["naive", "simex", "true"]


def test_fit_is_byte_identical_across_worker_counts(cohort_csv, workdir):
    args = ["-q", "fit", "--data", str(cohort_csv), "--sigma-eta", "0.5", "--B", "3",
            "--boot", "3", "--seed", "9"]
    one = runner.invoke(app, [*args, "--workers", "1", "--out", "one.json"])
    eight = runner.invoke(app, [*args, "--workers", "8", "--out", "eight.json"])
    assert one.exit_code == 0, one.output
    assert eight.exit_code == 0, eight.output
    assert (workdir / "one.json").read_bytes() == (workdir / "eight.json").read_bytes()


def test_sensitivity_markdown(cohort_csv, workdir):
    res = runner.invoke(app, ["-q", "sensitivity", "--data", str(cohort_csv), "--sigma-e", "0.15",
                              "--B", "2", "--boot", "2", "--format", "md", "--out", "sens.md"])
    assert res.exit_code == 0, res.output
    text = (workdir / "sens.md").read_text()
    assert "| PH |  | naive |" in text
    assert "| PH | 0.15 | simex |" in text


def test_calibrate_prints_the_bound(workdir):
    res = runner.invoke(app, ["calibrate", "--censoring", "0.5", "--pilot", "20000"])
    assert res.exit_code == 0, res.output
    assert "'c'" in res.output or '"c"' in res.output


def test_bad_list_is_a_validation_error(workdir):
    res = runner.invoke(app, ["simulate", "--censoring", "a,b", "--reps", "2"])
    assert res.exit_code == 2
