"""CSV ingestion and output helpers for the command-line tools."""

from __future__ import annotations

import csv

import numpy as np

from .errors import InputError
from .graph import Dataset


def _parse_rows(path):
    """Yield (line_number, fields) for non-comment rows of a CSV file."""
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].startswith("#")):
                continue
            yield lineno, row


def load_csv(path) -> Dataset:
    """Read a dataset: header row, covariate columns, response last.

    By convention the last column is y.  Files written by the simulator carry
    a trailing `theta_star` column; in that case the `y` column is the
    response and `theta_star` is ignored.
    """
    rows = _parse_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise InputError(f"{path}: file is empty") from None
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    ncol = len(header)
    if ncol < 2:
        raise InputError(f"{path}: need at least 2 columns, found {ncol}")
    y_col = ncol - 1
    x_cols = list(range(ncol - 1))
    if header[-1].strip() == "theta_star" and "y" in [h.strip() for h in header]:
        y_col = [h.strip() for h in header].index("y")
        x_cols = list(range(y_col))

    data = []
    for lineno, row in rows:
        if len(row) != ncol:
            raise InputError(
                f"{path}:{lineno}: expected {ncol} fields, found {len(row)}"
            )
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric cell") from None
    if not data:
        raise InputError(f"{path}: no data rows")
    arr = np.array(data)
    return Dataset(arr[:, x_cols], arr[:, y_col])


def save_dataset_csv(data: Dataset, path) -> None:
    header = ",".join([f"x{i + 1}" for i in range(data.d)] + ["y"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(
            fh, np.column_stack([data.X, data.y]), delimiter=",", fmt="%.17g"
        )


def load_vector_csv(path) -> np.ndarray:
    """Read a single-column CSV (e.g. a fitted theta dump)."""
    vals = []
    rows = _parse_rows(path)
    try:
        next(rows)  # header
    except StopIteration:
        raise InputError(f"{path}: file is empty") from None
    for lineno, row in rows:
        try:
            vals.append(float(row[0]))
        except (ValueError, IndexError):
            raise InputError(f"{path}:{lineno}: non-numeric cell") from None
    if not vals:
        raise InputError(f"{path}: no data rows")
    return np.array(vals)


def save_vector_csv(values: np.ndarray, path, name: str = "theta") -> None:
    with open(path, "w") as fh:
        fh.write(name + "\n")
        np.savetxt(fh, np.asarray(values, dtype=float), fmt="%.17g")
