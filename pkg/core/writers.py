"""Output writers for trial rows, paired comparisons and JSON summaries."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Sequence
from typing import Any, TextIO

import numpy as np

from core import constants
from core.exceptions import OutputError

_logger = logging.getLogger(__name__)

PAIRED_COLUMNS: tuple[str, ...] = (
    "trial",
    "seed",
    "t",
    "opera_error",
    "pogd_error",
    "opera_norm",
    "pogd_norm",
)


def _plain(value: Any) -> Any:
    """JSON-safe value: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


class CsvWriter:
    """Writes rows to a CSV file with a fixed column order.

    ``None`` cells are written empty; floats keep their full ``repr``.
    """

    def __init__(
        self,
        file_path: str,
        columns: Sequence[str] = constants.RESULT_COLUMNS,
    ):
        self.file_path = file_path
        self.columns = tuple(columns)
        try:
            self._file: TextIO | None = open(file_path, "w", newline="", encoding="utf-8")
            self._writer = csv.writer(self._file)
            self._writer.writerow(self.columns)
        except OSError as e:
            raise OutputError(f"Failed to open output file: {e}")

    def write_row(self, row: dict[str, Any]) -> None:
        if self._file is None:
            raise OutputError(f"{self.file_path} is already closed")
        self._writer.writerow([row.get(column) for column in self.columns])

    def finalize(self) -> None:
        if self._file:
            self._file.close()
            self._file = None


def write_json(payload: dict[str, Any], file_path: str) -> None:
    """Write *payload* as indented JSON."""
    try:
        with open(file_path, "w", encoding="utf-8") as f:
            json.dump(_plain(payload), f, indent=2, sort_keys=False)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"Failed to write JSON output: {e}")
    _logger.debug("Wrote %s", file_path)


def write_rows(
    rows: Iterable[dict[str, Any]],
    file_path: str,
    columns: Sequence[str] = constants.RESULT_COLUMNS,
) -> int:
    """Stream *rows* to a CSV file and return the number written."""
    writer = CsvWriter(file_path, columns)
    count = 0
    try:
        for row in rows:
            writer.write_row(row)
            count += 1
    finally:
        writer.finalize()
    _logger.info("Wrote %d row(s) to %s", count, file_path)
    return count
