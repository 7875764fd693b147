"""CSV and report serialization for the command-line tools.

Signals are written time-major (one sample per row, one channel per
column, single header row); matrices are written row-major with no
header. Readers auto-detect an optional header row. Floats carry 17
significant digits, enough to round-trip doubles exactly. Reports are
JSON documents with sorted keys, so identical runs serialize to
identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .exceptions import CsvFormatError

__all__ = [
    "write_signals_csv",
    "read_signals_csv",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_complex_matrix_csv",
    "read_complex_matrix_csv",
    "write_vector_csv",
    "write_report",
    "read_report",
    "jsonable",
]

_FLOAT_FMT = "%.17g"


def _format_row(values):
    return ",".join(_FLOAT_FMT % v for v in values)


def _parse_rows(path):
    """Split a CSV file into (line_number, cells) pairs, skipping blank lines."""
    rows = []
    with open(path, "r", newline="") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if stripped:
                rows.append((lineno, stripped.split(",")))
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return rows


def _parse_table(path, convert):
    """Parse rows with ``convert`` per cell; auto-detect one header row."""
    rows = _parse_rows(path)
    start = 0
    try:
        [convert(cell.strip()) for cell in rows[0][1]]
    except ValueError:
        start = 1
    if not rows[start:]:
        raise CsvFormatError(f"{path}: no data rows")
    width = len(rows[start][1])
    table = []
    for lineno, cells in rows[start:]:
        if len(cells) != width:
            raise CsvFormatError(
                f"{path}: line {lineno} has {len(cells)} fields, expected {width}",
                line=lineno,
            )
        try:
            table.append([convert(cell.strip()) for cell in cells])
        except ValueError as err:
            raise CsvFormatError(f"{path}: line {lineno}: {err}", line=lineno)
    return table


def write_signals_csv(path, data, channel_names=None):
    """Write an (n_channels, n_samples) array time-major with a header row."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if channel_names is None:
        channel_names = [f"ch{i}" for i in range(data.shape[0])]
    lines = [",".join(channel_names)]
    lines.extend(_format_row(sample) for sample in data.T)
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def read_signals_csv(path):
    """Read a time-major CSV back into an (n_channels, n_samples) array."""
    return np.asarray(_parse_table(path, float), dtype=float).T


def write_matrix_csv(path, matrix):
    """Write a real matrix row-major, no header."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w") as handle:
        handle.write("\n".join(_format_row(row) for row in matrix) + "\n")


def read_matrix_csv(path):
    return np.asarray(_parse_table(path, float), dtype=float)


def write_complex_matrix_csv(path, matrix):
    """Write a complex matrix row-major; cells look like ``0.5-0.25j``."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    fmt = _FLOAT_FMT + "%+.17gj"
    with open(path, "w") as handle:
        handle.write(
            "\n".join(
                ",".join(fmt % (v.real, v.imag) for v in row) for row in matrix
            )
            + "\n"
        )


def read_complex_matrix_csv(path):
    return np.asarray(_parse_table(path, complex), dtype=complex)


def write_vector_csv(path, vector, fmt=_FLOAT_FMT):
    """Write a vector as a single column."""
    with open(path, "w") as handle:
        handle.write("\n".join(fmt % v for v in np.asarray(vector).ravel()) + "\n")


def jsonable(value):
    """Recursively convert numpy containers/scalars into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def write_report(path, report):
    """Serialize a report dict as stable, human-readable JSON."""
    with open(path, "w") as handle:
        json.dump(jsonable(report), handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_report(path):
    with open(path, "r") as handle:
        return json.load(handle)
