"""CSV and JSON serialisation used by the scenario runner.

CSV files are comma separated with a header row, LF line endings, UTF-8,
and floats written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ValidationError


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_matrix_csv(path, matrix, prefix="col"):
    m = np.asarray(matrix, float)
    write_csv(path, [f"{prefix}_{j}" for j in range(m.shape[1])], m)


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_columns(path, required) -> dict[str, np.ndarray]:
    """Read a headered numeric CSV and return the ``required`` columns."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValidationError(f"{path}: missing column(s) {missing}; found {header}")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValidationError(f"{path}: need at least two data rows")
    return {c: data[:, header.index(c)] for c in required}


def read_field_csv(path):
    """Tabulated drift/diffusion: columns ``k, mu, D``."""
    cols = read_columns(path, ["k", "mu", "D"])
    return cols["k"], cols["mu"], cols["D"]


def read_potential_csv(path):
    """Tabulated potential: columns ``k, V``."""
    cols = read_columns(path, ["k", "V"])
    return cols["k"], cols["V"]
