"""Shared fixtures: real artifacts produced by the upstream CLI.

The upstream package is exercised only through its command-line interface,
matching how this package is meant to be fed in practice.
"""

import json
import shutil
import subprocess

import pytest

MIXLAB = shutil.which("mixlab")


def run_mixlab(command: str, cfg: dict, tmp_path, name: str):
    assert MIXLAB, "upstream mixlab CLI must be installed to generate fixtures"
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    proc = subprocess.run(
        [MIXLAB, command, "--config", str(cfg_path), "--quiet"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, f"mixlab {command} failed: {proc.stderr}"


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """One directory holding every artifact the render tests consume."""
    root = tmp_path_factory.mktemp("artifacts")

    flat = root / "flat"
    run_mixlab("solve-coupled", {
        "domain": {"dim": 1, "m": 32},
        "partition": {"family": "alternating1d", "n": 2, "k": 0.5},
        "kernel": {"family": "constant"},
        "initial": {"name": "uniform"},
        "time": {"T": 0.5, "snapshots": [0.0, 0.5]},
        "output": {"directory": str(flat)},
    }, root, "flat")

    wave = root / "wave"
    run_mixlab("solve-coupled", {
        "domain": {"dim": 1, "m": 32},
        "partition": {"family": "alternating1d", "n": 2, "k": 0.5},
        "kernel": {"family": "constant"},
        "initial": {"name": "cosine-bump", "params": {"alpha": 0.5}},
        "time": {"T": 0.5, "snapshots": [0.0, 0.25, 0.5]},
        "output": {"directory": str(wave)},
    }, root, "wave")

    heat = root / "heat"
    run_mixlab("solve-coupled", {
        "domain": {"dim": 2, "m": 16},
        "partition": {"family": "chessboard", "n": 4},
        "kernel": {"family": "constant"},
        "initial": {"name": "cosine-bump", "params": {"alpha": 0.5}},
        "time": {"T": 0.1, "snapshots": [0.0, 0.1]},
        "output": {"directory": str(heat)},
    }, root, "heat")

    limit = root / "limit"
    run_mixlab("solve-limit", {
        "domain": {"dim": 1, "m": 16},
        "partition": {"family": "alternating1d", "n": 2, "k": 0.5},
        "kernel": {"family": "constant"},
        "initial": {"name": "cosine-bump", "params": {"alpha": 0.5}},
        "time": {"T": 1.0, "snapshots": [0.0, 1.0], "dt": 0.05},
        "output": {"directory": str(limit)},
    }, root, "limit")

    sim = root / "sim"
    run_mixlab("simulate-limit", {
        "domain": {"dim": 1, "m": 16},
        "partition": {"family": "alternating1d", "n": 2, "k": 0.5},
        "kernel": {"family": "constant"},
        "initial": {"name": "cosine-bump", "params": {"alpha": 0.5}},
        "time": {"T": 1.0, "snapshots": [0.0, 1.0]},
        "particles": {"N": 20000, "seed": 77},
        "output": {"directory": str(sim)},
    }, root, "sim")

    sweep = root / "sweep"
    run_mixlab("sweep", {
        "domain": {"dim": 1},
        "partition": {"family": "alternating1d", "k": 0.5},
        "kernel": {"family": "constant"},
        "sweep": {"n_list": [2, 4, 8], "resolution_rule": {"base": 16, "cap": 128}},
        "time": {"T": 0.5},
        "output": {"directory": str(sweep)},
    }, root, "sweep")

    strips = root / "strips"
    run_mixlab("sweep", {
        "domain": {"dim": 2},
        "partition": {"family": "strips"},
        "kernel": {"family": "constant"},
        "initial": {"name": "cosine-bump", "params": {"alpha": 0.5, "axis": "y"}},
        "sweep": {"n_list": [2, 4], "resolution_rule": {"base": 8, "cap": 32}},
        "time": {"T": 0.5},
        "output": {"directory": str(strips)},
    }, root, "strips")

    return root
