"""Schema-validated loading of the simulator's CSV outputs."""

from __future__ import annotations

import csv
from pathlib import Path


class SchemaError(ValueError):
    """Input file does not match the expected CSV schema."""


SCHEMAS = {
    "cdf": ["scheme", "r_m", "L", "threshold_m", "cdf"],
    "qlearn": ["run_id", "episode", "n_uavs", "positive_q_sum",
               "map_accuracy", "coverage"],
    "map": ["run_id", "episode", "cell_x", "cell_y", "log_odds"],
}


def load_rows(path, kind: str) -> list[dict]:
    """Read one CSV file and return its rows as dicts of floats/strings."""
    expected = SCHEMAS[kind]
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"input file not found: {path}")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in expected if col not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; "
                              f"expected header {','.join(expected)}")
        rows = []
        for raw in reader:
            row = {}
            for col in expected:
                value = raw[col]
                if col == "scheme":
                    row[col] = value
                else:
                    try:
                        row[col] = float(value)
                    except (TypeError, ValueError) as exc:
                        raise SchemaError(
                            f"{path}: bad value {value!r} in column {col}") from exc
            rows.append(row)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def load_many(paths, kind: str) -> list[dict]:
    rows = []
    for path in paths:
        rows.extend(load_rows(path, kind))
    return rows
