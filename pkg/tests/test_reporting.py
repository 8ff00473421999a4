"""Tests for reading results back and consolidating a results directory."""

from pathlib import Path

import pytest

from core.exceptions import OutputError, ValidationError
from core.reporting import (
    consolidate,
    find_result_files,
    format_fit_table,
    format_paired_table,
    read_results,
    write_table,
)
from core.runner import PairedRow, ResultRow, TrialResult
from core.writers import write_rows


def _results(mode, scale, seeds=(5, 6)):
    out = []
    for trial, seed in enumerate(seeds):
        rows = [
            ResultRow(t, 0.1, scale * t**-0.5, None, 1.0, 2.0 if mode != "pogd" else None, None)
            for t in (33, 65, 129, 257)
        ]
        out.append(TrialResult(trial, seed, mode, rows))
    return out


def _write(directory: Path, name: str, results) -> Path:
    path = directory / f"{name}_results.csv"
    write_rows((row for r in results for row in r.as_dicts()), str(path))
    return path


class TestReadResults:
    """Tests for read_results()."""

    def test_reads_back(self, tmp_path):
        original = _results("opera-reduced", 1.0)
        path = _write(tmp_path, "a", original)
        restored = read_results(path)
        assert [(r.trial, r.seed, r.mode) for r in restored] == [
            (0, 5, "opera-reduced"),
            (1, 6, "opera-reduced"),
        ]
        assert restored[0].rows == original[0].rows

    def test_blank_step_size(self, tmp_path):
        rows = [
            ResultRow(2, None, 0.4, None, 0.0, 0.0, None),
            ResultRow(3, 0.5, 0.3, None, 0.1, 1.0, None),
        ]
        path = _write(tmp_path, "early", [TrialResult(0, 1, "opera-direct", rows)])
        restored = read_results(path)[0].rows
        assert restored[0].gamma_t is None
        assert restored[1].gamma_t == 0.5

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad_results.csv"
        path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
        with pytest.raises(OutputError, match="bad_results.csv"):
            read_results(path)

    def test_corrupt_cell(self, tmp_path):
        path = _write(tmp_path, "c", _results("pogd", 1.0))
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[2] = lines[2].replace("0.1", "abc", 1)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(OutputError, match="line 3"):
            read_results(path)


class TestFindResultFiles:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(ValidationError):
            find_result_files(tmp_path / "nope")

    def test_empty_directory(self, tmp_path):
        (tmp_path / "notes.txt").write_text("x", encoding="utf-8")
        with pytest.raises(ValidationError, match="_results.csv"):
            find_result_files(tmp_path)

    def test_sorted(self, tmp_path):
        _write(tmp_path, "b", _results("pogd", 1.0))
        _write(tmp_path, "a", _results("pogd", 1.0))
        assert [p.name for p in find_result_files(tmp_path)] == ["a_results.csv", "b_results.csv"]


class TestConsolidate:
    """Tests for consolidate() and the text tables."""

    def test_summary_and_pairs(self, tmp_path):
        _write(tmp_path, "opera", _results("opera-reduced", 1.0))
        _write(tmp_path, "pogd", _results("pogd", 2.0))
        summary, paired = consolidate(tmp_path)
        assert [entry["file"] for entry in summary["files"]] == [
            "opera_results.csv",
            "pogd_results.csv",
        ]
        fit = summary["files"][0]["rate_fits"]["opera-reduced"]
        assert fit["slope"] == pytest.approx(-0.5)
        assert summary["files"][0]["n_trials"] == 2
        assert summary["files"][0]["bound_violation_fraction"] is None
        assert summary["paired_rows"] == len(paired) == 8
        assert all(p.pogd_error == pytest.approx(2.0 * p.opera_error) for p in paired)

    def test_no_pairs_without_pogd(self, tmp_path):
        _write(tmp_path, "opera", _results("opera-direct", 1.0))
        summary, paired = consolidate(tmp_path)
        assert paired == []
        assert summary["paired_rows"] == 0

    def test_fit_table_marks_short_files(self, tmp_path):
        short = [TrialResult(0, 1, "pogd", [ResultRow(11, 0.1, 0.3, None, 0.0, None, None)])]
        _write(tmp_path, "short", short)
        summary, _ = consolidate(tmp_path)
        assert "(too few points)" in format_fit_table(summary)

    def test_paired_table(self, tmp_path):
        text = format_paired_table([PairedRow(0, 5, 11, 0.1, 0.2, 1.0, 1.0)])
        assert "opera_error" in text.splitlines()[0]
        assert "0.5" in text.splitlines()[2]
        write_table(text, tmp_path / "table.txt")
        assert (tmp_path / "table.txt").read_text(encoding="utf-8") == text

    def test_empty_paired_table(self):
        assert "no paired" in format_paired_table([])
