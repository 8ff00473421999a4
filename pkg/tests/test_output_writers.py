"""Tests for the CSV row writer and the JSON-safe summary writer."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from core import constants
from core.exceptions import OutputError
from core.writers import (
    PAIRED_COLUMNS,
    CsvWriter,
    write_json,
    write_rows,
)


def _row(t: int, **extra) -> dict:
    row = {
        "trial": 0,
        "seed": 3,
        "t": t,
        "gamma_t": 0.5,
        "error_rho": 0.125,
        "error_rho_stderr": None,
        "norm_K": 1.0,
        "lemma1_bound": 2.0,
        "thm1_bound": None,
        "mode": "opera-reduced",
    }
    row.update(extra)
    return row


def test_csv_writer_write_and_finalize(tmp_path):
    """Test CsvWriter writes the header, rows and empty cells for None."""
    out = tmp_path / "opera_results.csv"
    writer = CsvWriter(str(out))
    writer.write_row(_row(2))
    writer.finalize()

    with open(out, newline="", encoding="utf-8") as f:
        lines = list(csv.reader(f))
    assert tuple(lines[0]) == constants.RESULT_COLUMNS
    assert lines[1] == ["0", "3", "2", "0.5", "0.125", "", "1.0", "2.0", "", "opera-reduced"]


def test_csv_writer_full_float_precision(tmp_path):
    out = tmp_path / "p.csv"
    write_rows([_row(2, error_rho=1 / 3)], str(out))
    with open(out, newline="", encoding="utf-8") as f:
        record = next(csv.DictReader(f))
    assert float(record["error_rho"]) == 1 / 3


def test_csv_writer_rejects_write_after_finalize(tmp_path):
    writer = CsvWriter(str(tmp_path / "x.csv"))
    writer.finalize()
    with pytest.raises(OutputError):
        writer.write_row(_row(2))


def test_csv_writer_unwritable_path(tmp_path):
    with pytest.raises(OutputError):
        CsvWriter(str(tmp_path / "missing" / "x.csv"))


def test_write_rows_counts_and_custom_columns(tmp_path):
    out = tmp_path / "paired.csv"
    rows = [dict(zip(PAIRED_COLUMNS, (0, 1, 11, 0.2, 0.3, 1.0, 0.5)))] * 3
    assert write_rows(rows, str(out), PAIRED_COLUMNS) == 3
    assert out.read_text(encoding="utf-8").splitlines()[0] == ",".join(PAIRED_COLUMNS)


def test_write_json_converts_numpy_and_infinities(tmp_path):
    out = tmp_path / "summary.json"
    write_json(
        {"slope": np.float64(-0.25), "ts": np.array([1, 2]), "R": float("inf"), 3: None},
        str(out),
    )
    data = json.loads(out.read_text(encoding="utf-8"))
    assert data == {"slope": -0.25, "ts": [1, 2], "R": "inf", "3": None}


def test_write_json_unwritable_path(tmp_path):
    with pytest.raises(OutputError):
        write_json({}, str(tmp_path / "missing" / "x.json"))
