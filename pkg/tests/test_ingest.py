import numpy as np
import pytest

from lbsimex.config import CsvSchema
from lbsimex.errors import CohortValidationError, DataIOError
from lbsimex.ingest import load_cohort_csv, write_cohort_csv

WHAS = CsvSchema(trunc_time="los", obs_time="lenfol", status="fstat", covariates=["bmi", "bp"])


def _write(tmp_path, text, name="cohort.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_well_formed_file(tmp_path):
    path = _write(tmp_path, "id,trunc_time,obs_time,status,w1,w2\n"
                            "a,0.1,1.0,1,0.5,1.5\n"
                            "b,0.0,2.0,0,-0.2,0.3\n"
                            "c,0.4,0.9,1,1.1,-0.7\n")
    cohort = load_cohort_csv(path)
    assert cohort.n == 3 and cohort.p == 2
    assert cohort.ids == ["a", "b", "c"]
    assert cohort.status.tolist() == [1, 0, 1]
    assert cohort.X is None


def test_truth_columns_are_picked_up_in_order(tmp_path):
    path = _write(tmp_path, "trunc_time,obs_time,status,w2,w1,x1,x2\n"
                            "0.1,1.0,1,2.0,1.0,1.1,2.1\n"
                            "0.0,2.0,0,4.0,3.0,3.1,4.1\n")
    cohort = load_cohort_csv(path)
    assert cohort.W.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert cohort.X.tolist() == [[1.1, 2.1], [3.1, 4.1]]
    assert cohort.ids is None


def test_whas_column_mapping(tmp_path):
    path = _write(tmp_path, "id,los,lenfol,fstat,bmi,bp\n"
                            "1,4,2178,0,31.4,130\n"
                            "2,5,1220,1,22.7,146\n")
    cohort = load_cohort_csv(path, WHAS)
    assert cohort.trunc_time.tolist() == [4.0, 5.0]
    assert cohort.obs_time.tolist() == [2178.0, 1220.0]
    assert cohort.W[:, 1].tolist() == [130.0, 146.0]


def test_truncation_after_exit_names_the_line(tmp_path):
    path = _write(tmp_path, "id,los,lenfol,fstat,bmi,bp\n"
                            "1,4,2178,1,31.4,130\n"
                            "2,50,12,0,22.7,146\n")
    with pytest.raises(CohortValidationError) as exc:
        load_cohort_csv(path, WHAS)
    assert exc.value.rules == ["trunc_exceeds_obs"]
    assert "line 3" in str(exc.value)


def test_header_only_file_is_an_empty_cohort(tmp_path):
    path = _write(tmp_path, "id,trunc_time,obs_time,status,w1\n")
    with pytest.raises(CohortValidationError) as exc:
        load_cohort_csv(path)
    assert exc.value.rules == ["empty"]


def test_missing_column(tmp_path):
    path = _write(tmp_path, "id,trunc_time,status,w1\n1,0.1,1,0.0\n")
    with pytest.raises(CohortValidationError) as exc:
        load_cohort_csv(path)
    assert exc.value.rules == ["missing_column"]
    assert "obs_time" in str(exc.value)


def test_non_numeric_cell_names_line_and_column(tmp_path):
    path = _write(tmp_path, "trunc_time,obs_time,status,w1\n"
                            "0.1,1.0,1,0.5\n"
                            "0.2,abc,0,0.1\n")
    with pytest.raises(CohortValidationError) as exc:
        load_cohort_csv(path)
    assert exc.value.rules == ["non_numeric"]
    assert "line 3" in str(exc.value) and "obs_time" in str(exc.value)


def test_missing_file_is_an_io_error(tmp_path):
    with pytest.raises(DataIOError):
        load_cohort_csv(tmp_path / "nope.csv")


def test_written_cohort_reads_back(tmp_path, small_cohort):
    path = write_cohort_csv(small_cohort, tmp_path / "out" / "c.csv", with_truth=True)
    header = path.read_text(encoding="utf-8").splitlines()[0]
    assert header == "id,trunc_time,obs_time,status,w1,w2,x1,x2"
    back = load_cohort_csv(path)
    assert np.array_equal(back.obs_time, small_cohort.obs_time)
    assert np.array_equal(back.W, small_cohort.W)
    assert np.array_equal(back.X, small_cohort.X)


def test_truth_is_omitted_unless_requested(tmp_path, small_cohort):
    path = write_cohort_csv(small_cohort, tmp_path / "c.csv")
    assert "x1" not in path.read_text(encoding="utf-8").splitlines()[0]
