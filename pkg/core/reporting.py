"""Consolidated reports over a directory of result files.

A results directory holds ``<name>_results.csv`` files written by ``opera run``
or ``opera compare``. :func:`consolidate` reads them back, fits rates per file
and mode and joins OPERA and POGD rows on ``(seed, t)``.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any

from core import constants
from core.exceptions import OutputError, ValidationError
from core.runner import (
    PairedRow,
    ResultRow,
    TrialResult,
    bound_violation_fraction,
    fit_rate,
    pair_results,
)

_logger = logging.getLogger(__name__)

RESULTS_SUFFIX = "_results.csv"
PAIRED_SUFFIX = "_paired.csv"
SUMMARY_SUFFIX = "_summary.json"
REPORT_SUMMARY = "report_summary.json"
REPORT_TABLE = "report_table.txt"

_INT_COLUMNS = ("trial", "seed", "t")


def _optional_float(value: str) -> float | None:
    return None if value == "" else float(value)


def read_results(path: Path) -> list[TrialResult]:
    """Parse one results CSV back into ``TrialResult`` objects.

    Raises:
        OutputError: If the header is wrong or a cell cannot be parsed; the
            message names the file.
    """
    grouped: dict[tuple[int, int, str], list[ResultRow]] = defaultdict(list)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != constants.RESULT_COLUMNS:
                raise OutputError(f"{path}: unexpected header {reader.fieldnames}")
            for line, record in enumerate(reader, start=2):
                try:
                    key = (int(record["trial"]), int(record["seed"]), record["mode"])
                    grouped[key].append(
                        ResultRow(
                            t=int(record["t"]),
                            gamma_t=_optional_float(record["gamma_t"]),
                            error_rho=float(record["error_rho"]),
                            error_rho_stderr=_optional_float(record["error_rho_stderr"]),
                            norm_K=float(record["norm_K"]),
                            lemma1_bound=_optional_float(record["lemma1_bound"]),
                            thm1_bound=_optional_float(record["thm1_bound"]),
                        )
                    )
                except (TypeError, ValueError) as e:
                    raise OutputError(f"{path}: line {line} is corrupt ({e})") from e
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise OutputError(f"{path}: cannot read results ({e})") from e

    results = []
    for (trial, seed, mode), rows in sorted(grouped.items()):
        rows.sort(key=lambda r: r.t)
        results.append(TrialResult(trial, seed, mode, rows))
    return results


def find_result_files(results_dir: Path) -> list[Path]:
    """Results CSVs in *results_dir*, sorted by name.

    Raises:
        ValidationError: If the directory does not exist or holds no results.
    """
    if not results_dir.is_dir():
        raise ValidationError(f"Results directory not found: {results_dir}")
    files = sorted(results_dir.glob(f"*{RESULTS_SUFFIX}"))
    if not files:
        raise ValidationError(f"No *{RESULTS_SUFFIX} files in {results_dir}")
    return files


def _fits(results: list[TrialResult], t_min: int) -> dict[str, Any]:
    fits: dict[str, Any] = {}
    for mode in dict.fromkeys(r.mode for r in results):
        try:
            fits[mode] = fit_rate(results, t_min, mode).as_dict()
        except ValidationError as e:
            _logger.info("No rate fit for %s: %s", mode, e)
            fits[mode] = None
    return fits


def consolidate(
    results_dir: Path, t_min: int = constants.RATE_FIT_T_MIN
) -> tuple[dict[str, Any], list[PairedRow]]:
    """Summary over every results file in *results_dir* plus the paired table."""
    files = find_result_files(results_dir)
    per_file: list[dict[str, Any]] = []
    everything: list[TrialResult] = []
    for path in files:
        results = read_results(path)
        everything.extend(results)
        per_file.append(
            {
                "file": path.name,
                "modes": sorted({r.mode for r in results}),
                "n_trials": len({r.trial for r in results}),
                "rate_fits": _fits(results, t_min),
                "bound_violation_fraction": bound_violation_fraction(results),
            }
        )

    opera_modes = [m for m in dict.fromkeys(r.mode for r in everything) if m != "pogd"]
    paired: list[PairedRow] = []
    if opera_modes and any(r.mode == "pogd" for r in everything):
        paired = pair_results(everything, opera_modes[0])

    summary = {
        "results_dir": str(results_dir),
        "files": per_file,
        "paired_rows": len(paired),
    }
    _logger.info("Consolidated %d file(s), %d paired row(s)", len(files), len(paired))
    return summary, paired


def format_paired_table(paired: list[PairedRow]) -> str:
    """Plain-text table of paired OPERA/POGD errors."""
    header = f"{'seed':>8} {'t':>8} {'opera_error':>14} {'pogd_error':>14} {'ratio':>10}"
    lines = [header, "-" * len(header)]
    for row in sorted(paired, key=lambda r: (r.seed, r.t)):
        ratio = row.opera_error / row.pogd_error if row.pogd_error > 0 else float("inf")
        lines.append(
            f"{row.seed:>8d} {row.t:>8d} {row.opera_error:>14.6g} "
            f"{row.pogd_error:>14.6g} {ratio:>10.4g}"
        )
    if not paired:
        lines.append("(no paired OPERA/POGD rows)")
    return "\n".join(lines) + "\n"


def format_fit_table(summary: dict[str, Any]) -> str:
    """Plain-text listing of rate fits per file and mode."""
    lines = []
    for entry in summary["files"]:
        for mode, fit in entry["rate_fits"].items():
            if fit is None:
                lines.append(f"{entry['file']:<32} {mode:<14} (too few points)")
            else:
                lines.append(
                    f"{entry['file']:<32} {mode:<14} slope={fit['slope']:.4f} "
                    f"t in [{fit['t_range'][0]}, {fit['t_range'][1]}]"
                )
    return "\n".join(lines) + "\n"


def write_table(text: str, path: Path) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Failed to write table: {e}")
