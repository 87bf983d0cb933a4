"""Batch front end: JSON config in, CSV artifacts plus a digest manifest out.

Subcommands and the config sections they read:

  partition       domain, partition                      -> partition.json
  solve-coupled   domain, partition, kernel, time, initial -> trajectory.csv
  solve-limit     domain, partition, kernel, time, initial -> limit_trajectory.csv
  simulate-n      domain, partition, kernel, initial, particles, time -> ensemble.csv
  simulate-limit  domain, partition, kernel, initial, particles, time -> ensemble.csv
  sweep           domain, partition, kernel, sweep [, time, initial] -> report.csv
  compare         compare                                -> zscores.csv

Every run writes metadata.json (the resolved config, reapplying it re-runs
the experiment) and manifest.json (filename, rows, sha256 digest per
artifact).  Identical config and seed reproduce identical digests.

Configs are strict: unknown sections or keys fail before any computation.
Exit codes by error category: config 2, alignment 3, stability 4,
normalization 5, io 6.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as mio
from .coupled import DEFAULT_CFL, Trajectory, assemble, integrate
from .errors import ConfigError, IOError_, MixLabError
from .fields import Field, initial_field
from .geometry import make_grid
from .homogenize import (
    ResolutionRule,
    _build_partition,
    default_resolution_rule,
    run_sweep,
)
from .kernels import KernelSpec, discretize
from .limit import initial_pair, integrate_limit, make_limit_operator
from .particles import SimConfig, bin_counts, bin_probabilities, simulate_coupled, simulate_limit, zscores

_EXIT_BY_CATEGORY = {"config": 2, "alignment": 3, "stability": 4, "normalization": 5, "io": 6}

_SECTIONS = {
    "partition": ({"domain", "partition"}, {"output"}),
    "solve-coupled": ({"domain", "partition", "kernel", "time", "initial"}, {"output"}),
    "solve-limit": ({"domain", "partition", "kernel", "time", "initial"}, {"output"}),
    "simulate-n": ({"domain", "partition", "kernel", "initial", "particles", "time"}, {"output"}),
    "simulate-limit": ({"domain", "partition", "kernel", "initial", "particles", "time"}, {"output"}),
    "sweep": ({"domain", "partition", "kernel", "sweep"}, {"time", "initial", "output"}),
    "compare": ({"compare"}, {"output"}),
}


def _check_keys(record: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(record) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} field(s): {sorted(unknown)}")
    missing = required - set(record)
    if missing:
        raise ConfigError(f"missing {where} field(s): {sorted(missing)}")


def _load_config(path: str, command: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise IOError_(f"cannot read config {path}: {e}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    required, optional = _SECTIONS[command]
    _check_keys(cfg, required | optional, required, "config")
    for name, section in cfg.items():
        if not isinstance(section, dict):
            raise ConfigError(f"config section {name!r} must be an object")
    return cfg


def _grid_from(cfg: dict, need_m: bool = True):
    sec = cfg["domain"]
    if need_m:
        _check_keys(sec, {"dim", "m"}, {"dim", "m"}, "domain")
        return make_grid(int(sec["dim"]), int(sec["m"]))
    _check_keys(sec, {"dim"}, {"dim"}, "domain")
    dim = int(sec["dim"])
    if dim not in (1, 2):
        raise ConfigError(f"domain dim must be 1 or 2, got {dim}")
    return dim


def _partition_from(cfg: dict, grid, need_n: bool = True):
    sec = cfg["partition"]
    if need_n:
        _check_keys(sec, {"family", "n", "k", "r"}, {"family", "n"}, "partition")
    else:
        _check_keys(sec, {"family", "k", "r"}, {"family"}, "partition")
    k = float(sec.get("k", 0.5))
    r = float(sec.get("r", 0.3))
    if need_n:
        return _build_partition(str(sec["family"]), int(sec["n"]), grid, k, r)
    return str(sec["family"]), k, r


def _kernel_spec_from(cfg: dict) -> KernelSpec:
    sec = cfg["kernel"]
    _check_keys(sec, {"family", "width", "tol"}, {"family"}, "kernel")
    return KernelSpec(
        family=str(sec["family"]),
        width=None if sec.get("width") is None else float(sec["width"]),
        sinkhorn_tol=float(sec.get("tol", 1e-12)),
    )


def _initial_from(cfg: dict, grid) -> Field:
    sec = cfg.get("initial", {"name": "cosine-bump"})
    _check_keys(sec, {"name", "params"}, {"name"}, "initial")
    return initial_field(grid, str(sec["name"]), sec.get("params"))


def _time_from(cfg: dict, allowed: set):
    sec = cfg.get("time", {})
    _check_keys(sec, allowed, {"T"} if sec else set(), "time")
    T = float(sec.get("T", 1.0))
    if T <= 0:
        raise ConfigError(f"horizon T must be positive, got {T}")
    snaps = sec.get("snapshots", 11)
    if isinstance(snaps, int):
        if snaps < 2:
            raise ConfigError("snapshot count must be at least 2")
        snapshots = np.linspace(0.0, T, snaps)
    else:
        snapshots = np.asarray([float(s) for s in snaps], dtype=float)
    return sec, T, snapshots


def _sim_config(cfg: dict, T: float, snapshots, seed_override, need_delta: bool) -> SimConfig:
    sec = cfg["particles"]
    allowed = {"N", "seed", "delta", "keep_events"} if need_delta else {"N", "seed", "keep_events"}
    _check_keys(sec, allowed, {"N", "seed"}, "particles")
    seed = int(sec["seed"]) if seed_override is None else int(seed_override)
    return SimConfig(
        n_particles=int(sec["N"]),
        seed=seed,
        horizon=T,
        snapshot_times=snapshots,
        brownian_substep=float(sec["delta"]) if need_delta else None,
        keep_event_log=bool(sec.get("keep_events", False)),
    )


def _resolved(cfg: dict, command: str, seed_override) -> dict:
    out = {"command": command, "config": cfg}
    if seed_override is not None and "particles" in cfg:
        out["config"] = {**cfg, "particles": {**cfg["particles"], "seed": int(seed_override)}}
    return out


def _cmd_partition(cfg, out_dir, seed_override, quiet):
    grid = _grid_from(cfg)
    part = _partition_from(cfg, grid)
    path = out_dir / "partition.json"
    rows = mio.write_metadata(part.summary(), path)
    if not quiet:
        print(f"partition: family={part.family} n={part.n} max_diam={part.max_diam}")
    return [(path, rows)]


def _cmd_solve_coupled(cfg, out_dir, seed_override, quiet):
    grid = _grid_from(cfg)
    part = _partition_from(cfg, grid)
    kernel = discretize(_kernel_spec_from(cfg), grid)
    u0 = _initial_from(cfg, grid)
    sec, T, snapshots = _time_from(cfg, {"T", "dt", "cfl_factor", "snapshots"})
    cfl = float(sec.get("cfl_factor", DEFAULT_CFL))
    dt = float(sec.get("dt", cfl * grid.h * grid.h))
    op = assemble(part, kernel, grid)
    traj = integrate(op, u0, T, dt, snapshots, cfl_factor=cfl)
    path = out_dir / "trajectory.csv"
    rows = mio.write_trajectory(traj, path)
    if not quiet:
        print(f"solve-coupled: {rows} rows over {traj.times.size} snapshots")
    return [(path, rows)]


def _cmd_solve_limit(cfg, out_dir, seed_override, quiet):
    grid = _grid_from(cfg)
    part = _partition_from(cfg, grid)
    kernel = discretize(_kernel_spec_from(cfg), grid)
    u0 = _initial_from(cfg, grid)
    sec, T, snapshots = _time_from(cfg, {"T", "dt", "snapshots"})
    op = make_limit_operator(Field(part.theta, 0.0, grid), kernel, strip_mode=part.family == "strips")
    dt = float(sec.get("dt", op.dt_bound()))
    ltraj = integrate_limit(op, initial_pair(Field(part.theta, 0.0, grid), u0), T, dt, snapshots)
    path = out_dir / "limit_trajectory.csv"
    rows = mio.write_limit_trajectory(ltraj, path)
    if not quiet:
        print(f"solve-limit: {rows} rows over {ltraj.times.size} snapshots")
    return [(path, rows)]


def _cmd_simulate(cfg, out_dir, seed_override, quiet, limit: bool):
    grid = _grid_from(cfg)
    part = _partition_from(cfg, grid)
    kernel = discretize(_kernel_spec_from(cfg), grid)
    u0 = _initial_from(cfg, grid)
    _, T, snapshots = _time_from(cfg, {"T", "snapshots"})
    sim = _sim_config(cfg, T, snapshots, seed_override, need_delta=not limit)
    if limit:
        ens = simulate_limit(Field(part.theta, 0.0, grid), kernel, u0, sim)
    else:
        ens = simulate_coupled(part, kernel, u0, sim)
    path = out_dir / "ensemble.csv"
    entries = [(path, mio.write_ensemble(ens, path))]
    if sim.keep_event_log:
        epath = out_dir / "events.csv"
        entries.append((epath, mio.write_events(ens, epath)))
    if not quiet:
        print(f"simulate: {ens.positions.shape[1]} particles, {ens.times.size} snapshots")
    return entries


def _cmd_sweep(cfg, out_dir, seed_override, quiet):
    dim = _grid_from(cfg, need_m=False)
    family, k, r = _partition_from(cfg, None, need_n=False)
    spec = _kernel_spec_from(cfg)
    sec = cfg["sweep"]
    _check_keys(sec, {"n_list", "resolution_rule"}, {"n_list"}, "sweep")
    rule = default_resolution_rule(dim)
    if "resolution_rule" in sec:
        rsec = sec["resolution_rule"]
        _check_keys(rsec, {"base", "cap"}, {"base", "cap"}, "resolution_rule")
        rule = ResolutionRule(int(rsec["base"]), int(rsec["cap"]))
    tsec, T, _ = _time_from(cfg, {"T"})
    isec = cfg.get("initial", {"name": "cosine-bump"})
    _check_keys(isec, {"name", "params"}, {"name"}, "initial")
    report = run_sweep(
        family=family,
        n_list=[int(n) for n in sec["n_list"]],
        kernel_spec=spec,
        u0_name=str(isec["name"]),
        u0_params=isec.get("params"),
        T=T,
        k=k,
        r=r,
        rule=rule,
    )
    path = out_dir / "report.csv"
    rows = mio.write_report(report, path)
    mpath = out_dir / "report_metadata.json"
    mrows = mio.write_metadata(report.metadata, mpath)
    if not quiet:
        fams = sorted({row.family for row in report.rows})
        print(f"sweep: {rows} rows, families {fams}")
    return [(path, rows), (mpath, mrows)]


def _infer_grid(table: dict, t: float):
    sel = table["t"] == t
    if not np.any(sel):
        raise ConfigError(f"trajectory artifact has no snapshot at t={t}")
    n_cells = int(np.count_nonzero(sel))
    dim = 2 if "y" in table else 1
    m = n_cells if dim == 1 else int(round(np.sqrt(n_cells)))
    if m ** dim != n_cells:
        raise ConfigError(f"trajectory snapshot holds {n_cells} cells, not a full {dim}-d grid")
    return make_grid(dim, m), sel


def _cmd_compare(cfg, out_dir, seed_override, quiet):
    sec = cfg["compare"]
    _check_keys(sec, {"ensemble", "trajectory", "bins", "t"}, {"ensemble", "trajectory", "bins", "t"}, "compare")
    bins, t = int(sec["bins"]), float(sec["t"])
    ens = mio.read_table(sec["ensemble"])
    traj = mio.read_table(sec["trajectory"])
    grid, sel = _infer_grid(traj, t)
    order = np.argsort(traj["cell_index"][sel], kind="stable")

    esel = ens["t"] == t
    if not np.any(esel):
        raise ConfigError(f"ensemble artifact has no snapshot at t={t}")
    coords = ["x"] if grid.dim == 1 else ["x", "y"]
    pos = np.column_stack([ens[c][esel] for c in coords])
    labels = ens["label"][esel]
    n = pos.shape[0]

    rows = []
    if "u" in traj:
        u = traj["u"][sel][order]
        probs = bin_probabilities(u, grid, bins)
        counts = bin_counts(pos, grid, bins)
        z = zscores(counts, probs, n)
        rows += [("all", i, int(counts[i]), probs[i], z[i]) for i in range(probs.size)]
        # label-2 occupancy against the B-side mass of the solved density
        meta_path = Path(sec["trajectory"]).parent / "metadata.json"
        try:
            meta = json.loads(meta_path.read_text())
        except OSError as e:
            raise IOError_(
                f"compare against a coupled trajectory needs its metadata sidecar {meta_path}: {e}"
            ) from e
        pcfg = meta["config"]
        part = _build_partition(
            pcfg["partition"]["family"], int(pcfg["partition"]["n"]), grid,
            float(pcfg["partition"].get("k", 0.5)), float(pcfg["partition"].get("r", 0.3)),
        )
        mass2 = float(np.sum(u[part.is_b])) * grid.h ** grid.dim
        obs2 = int(np.count_nonzero(labels == 2))
        z2 = zscores(np.array([obs2]), np.array([mass2]), n)[0]
        rows.append(("mass2", -1, obs2, mass2, z2))
    elif "a" in traj and "b" in traj:
        for name, lab in (("1", 1), ("2", 2)):
            dens = traj["a" if lab == 1 else "b"][sel][order]
            probs = bin_probabilities(dens, grid, bins)
            counts = bin_counts(pos[labels == lab], grid, bins)
            z = zscores(counts, probs, n)
            rows += [(name, i, int(counts[i]), probs[i], z[i]) for i in range(probs.size)]
            mass = float(np.sum(dens)) * grid.h ** grid.dim
            obs = int(np.count_nonzero(labels == lab))
            zm = zscores(np.array([obs]), np.array([mass]), n)[0]
            rows.append((f"mass{name}", -1, obs, mass, zm))
    else:
        raise ConfigError("trajectory artifact must carry a u column or a,b columns")

    path = out_dir / "zscores.csv"
    nrows = mio.write_zscores(rows, path)
    max_z = max(abs(r[4]) for r in rows)
    if not quiet:
        print(f"compare: {nrows} rows, max |z| = {max_z}")
    return [(path, nrows)]


_HANDLERS = {
    "partition": _cmd_partition,
    "solve-coupled": _cmd_solve_coupled,
    "solve-limit": _cmd_solve_limit,
    "simulate-n": lambda cfg, o, s, q: _cmd_simulate(cfg, o, s, q, limit=False),
    "simulate-limit": lambda cfg, o, s, q: _cmd_simulate(cfg, o, s, q, limit=True),
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mixlab",
        description="mixed local/nonlocal evolution laboratory: solvers, simulators, sweeps",
    )
    parser.add_argument("command", choices=sorted(_HANDLERS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", default=None, help="output directory (overrides config output.directory)")
    parser.add_argument("--seed", type=int, default=None, help="override particles.seed")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config, args.command)
        out = args.out or cfg.get("output", {}).get("directory")
        if out is None:
            raise ConfigError("no output directory: pass --out or set output.directory")
        if "output" in cfg:
            _check_keys(cfg["output"], {"directory"}, set(), "output")
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)

        entries = _HANDLERS[args.command](cfg, out_dir, args.seed, args.quiet)
        meta_path = out_dir / "metadata.json"
        mrows = mio.write_metadata(_resolved(cfg, args.command, args.seed), meta_path)
        entries.append((meta_path, mrows))
        manifest = mio.write_manifest(entries, out_dir)
        if not args.quiet:
            print(f"wrote {manifest}")
        return 0
    except MixLabError as e:
        print(f"error [{e.category}]: {e}", file=sys.stderr)
        return _EXIT_BY_CATEGORY.get(e.category, 1)


if __name__ == "__main__":
    sys.exit(main())
