"""Readers for the upstream CSV artifacts.

The five table layouts this package understands, keyed by their exact
column sets:

    trajectory  t, cell_index, x[, y], u
    limit       t, cell_index, x[, y], a, b
    ensemble    t, particle_id, x[, y], label
    report      family, n, test_id, gap_u, gap_a, gap_b, weak_residual
    zscores     label, bin_index, observed, expected_prob, z

Floats in the artifacts are written with full repr precision, so parsing
them reproduces the producer's doubles bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """Input file does not have the expected artifact layout."""


_LAYOUTS = {
    "trajectory": ({"t", "cell_index", "x", "u"}, {"y"}),
    "limit": ({"t", "cell_index", "x", "a", "b"}, {"y"}),
    "ensemble": ({"t", "particle_id", "x", "label"}, {"y"}),
    "report": (
        {"family", "n", "test_id", "gap_u", "gap_a", "gap_b", "weak_residual"},
        set(),
    ),
    "zscores": ({"label", "bin_index", "observed", "expected_prob", "z"}, set()),
}


def _infer(col: list[str]) -> np.ndarray:
    try:
        return np.array([int(v) for v in col], dtype=np.int64)
    except ValueError:
        pass
    try:
        return np.array([float(v) for v in col], dtype=np.float64)
    except ValueError:
        return np.array(col, dtype=object)


def read_table(path) -> dict[str, np.ndarray]:
    p = Path(path)
    try:
        with p.open(newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise SchemaError(f"cannot read {p}: {e}") from e
    if not rows:
        raise SchemaError(f"{p} is empty")
    header, data = rows[0], rows[1:]
    cols = {name: _infer([r[i] for r in data]) for i, name in enumerate(header)}
    return cols


def classify(table: dict) -> str:
    present = set(table)
    for kind, (required, optional) in _LAYOUTS.items():
        if required <= present and present <= required | optional:
            return kind
    raise SchemaError(
        f"columns {sorted(present)} match no known artifact layout; "
        f"expected one of {sorted(_LAYOUTS)}"
    )


def expect(table: dict, kind: str, path="input") -> dict:
    got = classify(table)
    if got != kind:
        required, optional = _LAYOUTS[kind]
        raise SchemaError(
            f"{path} holds a {got!r} table (columns {sorted(table)}), but this "
            f"plot needs a {kind!r} table with columns {sorted(required)}"
            + (f" (optional {sorted(optional)})" if optional else "")
        )
    return table


def snapshot_times(table: dict) -> np.ndarray:
    return np.unique(table["t"])


def grid_shape(table: dict, t: float) -> tuple[int, int]:
    """(dim, m) of the grid behind a density table at snapshot t."""
    sel = table["t"] == t
    n_cells = int(np.count_nonzero(sel))
    if n_cells == 0:
        raise SchemaError(f"no rows at t={t}")
    dim = 2 if "y" in table else 1
    m = n_cells if dim == 1 else int(round(np.sqrt(n_cells)))
    if m**dim != n_cells:
        raise SchemaError(f"{n_cells} cells at t={t} do not fill a {dim}-d grid")
    return dim, m


def density_at(table: dict, t: float, column: str) -> tuple[np.ndarray, np.ndarray]:
    """(cell centers as (n,dim), values ordered by cell index) at snapshot t."""
    sel = table["t"] == t
    order = np.argsort(table["cell_index"][sel], kind="stable")
    coords = ["x", "y"] if "y" in table else ["x"]
    centers = np.column_stack([table[c][sel][order] for c in coords])
    return centers, table[column][sel][order]
