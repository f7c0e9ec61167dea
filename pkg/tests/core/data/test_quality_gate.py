import pandas as pd
import pytest

from app.core.data.ingest import ingest_csv
from app.core.data.quality_gate import SampleQualityGate
from app.core.errors import DataValidationError


def test_every_bad_row_is_reported():
    gate = SampleQualityGate()

    # Lines 2..6 of a file with a header on line 1
    df = pd.DataFrame({
        'time': ['1.0', '-1', 'abc', '2', ''],
        'status': ['1', '1', '0', '5', '1'],
    })

    valid, violations = gate.validate_frame(df)
    assert valid is False
    assert "negative time at line 3" in violations
    assert "malformed time 'abc' at line 4" in violations
    assert "status must be 0 or 1, got '5' at line 5" in violations
    assert "missing time at line 6" in violations
    assert len(violations) == 4


def test_clean_rows_pass():
    gate = SampleQualityGate()
    df = pd.DataFrame({'time': ['0.5', '1.5'], 'status': ['1', '0']})
    valid, violations = gate.validate_frame(df)
    assert valid is True
    assert violations == []


def test_missing_column_and_horizon():
    gate = SampleQualityGate()
    valid, violations = gate.validate_frame(pd.DataFrame({'time': ['1']}))
    assert valid is False
    assert violations == ["missing column 'status'"]

    valid, violations = gate.validate_frame(pd.DataFrame({'time': ['4'], 'status': ['1']}), horizon=3.0)
    assert valid is False
    assert "beyond horizon" in violations[0]


def test_ingest_sorts_and_keeps_file(tmp_path):
    path = tmp_path / "rows.csv"
    text = "time,status\n3,1\n1,0\n2,1\n"
    path.write_text(text)

    sample = ingest_csv(path)
    assert list(sample.times) == [1.0, 2.0, 3.0]
    assert list(sample.statuses) == [0, 1, 1]
    assert sample.horizon == 3.0
    assert path.read_text() == text


def test_ingest_collects_violations(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,status\n-2,1\n1,7\n")
    with pytest.raises(DataValidationError) as exc:
        ingest_csv(path)
    assert len(exc.value.violations) == 2


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataValidationError):
        ingest_csv(tmp_path / "nope.csv")
