"""CSV readers/writers for data matrices, estimates and edge lists."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a comma-separated numeric matrix.

    A first row containing any non-numeric cell is taken as a header and its
    cells are returned as column names.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path} is empty")
    names = None
    if not all(_is_number(c) for c in rows[0]):
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    width = len(names) if names is not None else len(rows[0])
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
        try:
            values[i] = [float(c) for c in row]
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric cell in row {i + 1}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite values")
    return values, names


def write_matrix_csv(M, path, names: list[str] | None = None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if names is not None:
            if len(names) != M.shape[1]:
                raise ConfigError("one name per column required")
            w.writerow(names)
        for row in M:
            w.writerow([repr(float(x)) for x in row])


def top_edges(Sigma_hat, target_edges: int) -> list[tuple[int, int, float]]:
    """The ``target_edges`` largest-magnitude upper-triangular entries.

    Ordered by |weight| descending, then (i, j) ascending.
    """
    A = np.asarray(Sigma_hat, dtype=float)
    p = A.shape[0]
    total = p * (p - 1) // 2
    if not 0 <= target_edges <= total:
        raise ConfigError(f"target_edges must lie in [0, {total}], got {target_edges}")
    i, j = np.triu_indices(p, 1)
    w = A[i, j]
    # lexsort keys: last is primary
    order = np.lexsort((j, i, -np.abs(w)))[:target_edges]
    return [(int(i[t]), int(j[t]), float(w[t])) for t in order]


def export_network(Sigma_hat, target_edges: int, path, names: list[str] | None = None) -> int:
    """Write the thresholded network as ``feature_i,feature_j,weight`` rows; returns the edge count."""
    edges = top_edges(Sigma_hat, target_edges)
    label = (lambda t: names[t]) if names is not None else str
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_i", "feature_j", "weight"])
        for a, b, weight in edges:
            w.writerow([label(a), label(b), repr(weight)])
    return len(edges)


def load_json(path) -> dict:
    try:
        with Path(path).open(encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
