"""CSV ingestion and CSV/JSON serialisation of results."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .ustat import DataMatrix

__all__ = ["ingest_csv", "format_float", "to_csv", "to_json"]


def ingest_csv(path, has_header: bool = False) -> DataMatrix:
    """Read a comma-separated numeric table; rows are observations.

    Empty cells are treated as missing and rejected, as are ragged rows and
    non-numeric cells.  Blank lines are skipped.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    rows: list[list[float]] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, raw in enumerate(reader, start=1):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if has_header and width is None and not rows:
                width = len(raw)
                continue
            if width is None:
                width = len(raw)
            if len(raw) != width:
                raise DataError(
                    f"ragged row at line {line_no}: expected {width} fields, got {len(raw)}"
                )
            values = []
            for col, cell in enumerate(raw, start=1):
                text = cell.strip()
                if not text:
                    raise DataError(f"missing value at line {line_no}, column {col}")
                try:
                    val = float(text)
                except ValueError:
                    raise DataError(
                        f"non-numeric cell {text!r} at line {line_no}, column {col}"
                    ) from None
                if not math.isfinite(val):
                    raise DataError(f"non-finite value {text!r} at line {line_no}, column {col}")
                values.append(val)
            rows.append(values)
    if len(rows) < 4:
        raise DataError(f"n < 4: {path} holds {len(rows)} observation rows")
    return DataMatrix(np.array(rows, dtype=float))


def format_float(x) -> str:
    """17 significant digits: round-trips any float64 exactly."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def to_csv(records: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([format_float(rec.get(c)) if not isinstance(rec.get(c), str) else rec[c]
                         for c in columns])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def to_json(obj) -> str:
    # repr-based float output is the shortest string that round-trips exactly.
    return json.dumps(_json_safe(obj), indent=2) + "\n"
