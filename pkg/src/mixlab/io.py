"""CSV artifacts, metadata sidecars, and run manifests.

Column layouts are pinned here and nowhere else:

  trajectory        t, cell_index, x, (y,) u
  limit trajectory  t, cell_index, x, (y,) a, b
  ensemble          t, particle_id, x, (y,) label
  event log         particle_id, event_time, kind, from_x, (from_y,) to_x, (to_y)
  sweep report      family, n, test_id, gap_u, gap_a, gap_b, weak_residual

Floats are written with repr, the shortest string that parses back to the
same double, so artifacts round-trip bit for bit.  Each writer returns the
number of data rows it emitted; write_manifest records filename, row count,
and sha256 content digest per artifact, which is what run-to-run determinism
is asserted on.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import IOError_

_EVENT_NAMES = {0: "jump", 1: "suppressed", 2: "label-switch"}


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _open_out(path):
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        return p.open("w", newline="")
    except OSError as e:
        raise IOError_(f"cannot write {p}: {e}") from e


def _write_rows(path, header: list[str], rows) -> int:
    with _open_out(path) as f:
        w = csv.writer(f)
        w.writerow(header)
        count = 0
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])
            count += 1
    return count


def write_trajectory(traj, path) -> int:
    """Snapshot rows of a scalar density; see the module table for columns."""
    grid = traj.grid
    centers = grid.cell_centers
    coord_cols = ["x"] if grid.dim == 1 else ["x", "y"]
    header = ["t", "cell_index"] + coord_cols + ["u"]

    def rows():
        for s, t in enumerate(traj.times):
            vals = traj.values[s]
            for i in range(grid.n_cells):
                yield [float(t), i, *centers[i], float(vals[i])]

    return _write_rows(path, header, rows())


def write_limit_trajectory(ltraj, path) -> int:
    grid = ltraj.grid
    centers = grid.cell_centers
    coord_cols = ["x"] if grid.dim == 1 else ["x", "y"]
    header = ["t", "cell_index"] + coord_cols + ["a", "b"]

    def rows():
        for s, t in enumerate(ltraj.times):
            av, bv = ltraj.a_values[s], ltraj.b_values[s]
            for i in range(grid.n_cells):
                yield [float(t), i, *centers[i], float(av[i]), float(bv[i])]

    return _write_rows(path, header, rows())


def write_ensemble(ensemble, path) -> int:
    dim = ensemble.positions.shape[2]
    coord_cols = ["x"] if dim == 1 else ["x", "y"]
    header = ["t", "particle_id"] + coord_cols + ["label"]

    def rows():
        for s, t in enumerate(ensemble.times):
            pos, lab = ensemble.positions[s], ensemble.labels[s]
            for p in range(pos.shape[0]):
                yield [float(t), p, *pos[p], int(lab[p])]

    return _write_rows(path, header, rows())


def write_events(ensemble, path) -> int:
    """Flattened event log in simulation order; empty log writes header only."""
    if ensemble.events is None:
        raise IOError_("ensemble carries no event log; rerun with keep_event_log=True")
    dim = ensemble.positions.shape[2]
    if dim == 1:
        coord_cols = ["from_x", "to_x"]
    else:
        coord_cols = ["from_x", "from_y", "to_x", "to_y"]
    header = ["particle_id", "event_time", "kind"] + coord_cols

    def rows():
        for batch in ensemble.events:
            idx, time, kind = batch["idx"], batch["time"], batch["kind"]
            fp, tp = batch["from_pos"], batch["to_pos"]
            for j in range(idx.size):
                coords = [*fp[j], *tp[j]] if dim == 2 else [fp[j, 0], tp[j, 0]]
                yield [int(idx[j]), float(time[j]), _EVENT_NAMES[int(kind[j])], *coords]

    return _write_rows(path, header, rows())


def write_report(report, path) -> int:
    header = ["family", "n", "test_id", "gap_u", "gap_a", "gap_b", "weak_residual"]

    def rows():
        for r in report.rows:
            yield [r.family, r.n, r.test_id, r.gap_u, r.gap_a, r.gap_b, r.weak_residual]

    return _write_rows(path, header, rows())


def write_zscores(rows, path) -> int:
    """Comparison rows (label, bin_index, observed, expected_prob, z)."""
    return _write_rows(path, ["label", "bin_index", "observed", "expected_prob", "z"], rows)


def write_metadata(record: dict, path) -> int:
    """JSON sidecar; keys sorted so identical records serialize identically."""
    with _open_out(path) as f:
        json.dump(_jsonable(record), f, sort_keys=True, indent=2)
        f.write("\n")
    return 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def read_table(path) -> dict[str, np.ndarray]:
    """CSV back into columns, keyed by header name in file order.

    Integer-looking columns come back int64, numeric ones float64, anything
    else as strings.  repr-written floats therefore round-trip exactly.
    """
    p = Path(path)
    try:
        with p.open(newline="") as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise IOError_(f"{p} is empty, expected a CSV header") from None
            raw = list(reader)
    except OSError as e:
        raise IOError_(f"cannot read {p}: {e}") from e
    out: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        col = [row[j] for row in raw]
        out[name] = _infer_column(col)
    return out


def _infer_column(col: list[str]) -> np.ndarray:
    try:
        return np.array([int(s) for s in col], dtype=np.int64)
    except ValueError:
        pass
    try:
        return np.array([float(s) for s in col], dtype=float)
    except ValueError:
        return np.array(col, dtype=object)


def sha256_digest(path) -> str:
    h = hashlib.sha256()
    try:
        with Path(path).open("rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                h.update(chunk)
    except OSError as e:
        raise IOError_(f"cannot digest {path}: {e}") from e
    return h.hexdigest()


def write_manifest(entries: list[tuple], out_dir) -> Path:
    """entries: (path, rows) pairs; writes manifest.json in out_dir."""
    records = []
    for path, rows in entries:
        p = Path(path)
        records.append({"filename": p.name, "rows": int(rows), "digest": sha256_digest(p)})
    records.sort(key=lambda r: r["filename"])
    manifest_path = Path(out_dir) / "manifest.json"
    with _open_out(manifest_path) as f:
        json.dump({"artifacts": records}, f, sort_keys=True, indent=2)
        f.write("\n")
    return manifest_path
