"""Particle views of the two evolutions.

Pre-limit process: a particle jumps at rate one using the discrete kernel
row of its current cell; proposals from a B cell into a B cell are
suppressed (the particle stays), and while the particle sits in a B
component it performs reflected Brownian motion inside that component
(unit diffusion, matching the (1/2) Laplacian generator).  Labels are
never stored independently: label 1 means the position's cell is A.

Limit process: a particle carries a label explicitly.  From label 1 it
jumps at rate one to a kernel draw y and picks label 2 with probability
theta(y); from label 2 the rate-one clock thins, accepting with
probability 1 - theta(y), and an accepted event moves the particle and
turns it label 1.  A particle with label 2 never moves without switching.

Reflection uses folding, which is exact in distribution for rectangular
components.  Components of the ball family are rasterized discs; folding
there uses the component's bounding rectangle of cells, a documented
approximation (an excursion can land on an A cell, where the particle
simply rests until its next clock).

Determinism: one counter-based bit generator (Philox) seeded from the
master seed drives every draw in a fixed program order, so identical
configurations reproduce identical ensembles bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupled import _check_snapshots
from .errors import ComparisonError, ConfigError, DiagnosticError
from .fields import Field
from .geometry import Grid, Partition
from .kernels import DiscreteKernel

EVENT_KINDS = ("jump", "suppressed", "label-switch")
_JUMP, _SUPPRESSED, _SWITCH = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    seed: int
    horizon: float
    snapshot_times: tuple
    brownian_substep: float | None = None
    keep_event_log: bool = False

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigError(f"n_particles must be positive, got {self.n_particles}")
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.brownian_substep is not None and self.brownian_substep <= 0:
            raise ConfigError("brownian_substep must be positive when given")


@dataclass(frozen=True)
class ParticleState:
    position: np.ndarray
    label: int
    clock: float


class Ensemble:
    """Snapshot arrays for every particle, plus optional event logs."""

    def __init__(self, kind, times, positions, labels, clocks, metadata, events, initial):
        self.kind = kind                  # "coupled" | "limit"
        self.times = times                # (S,)
        self.positions = positions        # (S, N, dim)
        self.labels = labels              # (S, N) in {1, 2}
        self.clocks = clocks              # (S, N) remaining exponential time
        self.metadata = metadata
        self.events = events              # list of batch dicts or None
        self.initial = initial            # dict: position, cell, label at t=0

    @property
    def n_particles(self) -> int:
        return int(self.positions.shape[1])

    @property
    def n_snapshots(self) -> int:
        return int(self.times.size)

    def state(self, snapshot: int, particle: int) -> ParticleState:
        return ParticleState(
            position=self.positions[snapshot, particle].copy(),
            label=int(self.labels[snapshot, particle]),
            clock=float(self.clocks[snapshot, particle]),
        )


def reflect(position: np.ndarray, lo, hi) -> np.ndarray:
    """Fold a free move back into the box [lo, hi]; exact reflection in law."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = hi - lo
    y = np.mod(position - lo, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return lo + y


def _sample_initial_positions(u0: Field, n: int, rng: np.random.Generator):
    vals = u0.values
    if np.any(vals < 0):
        raise ConfigError("initial density must be nonnegative to sample particles")
    total = float(np.sum(vals))
    if total <= 0:
        raise ConfigError("initial density must have positive mass")
    cum = np.cumsum(vals)
    cells = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    cells = np.minimum(cells, u0.grid.n_cells - 1).astype(np.int64)
    jitter = rng.random((n, u0.grid.dim)) - 0.5
    pos = u0.grid.cell_centers[cells] + jitter * u0.grid.h
    return pos, cells


def _component_tables(partition: Partition):
    nc = len(partition.components)
    dim = partition.grid.dim
    lo = np.zeros((nc, dim))
    hi = np.zeros((nc, dim))
    for i, c in enumerate(partition.components):
        lo[i] = c.lo
        hi[i] = c.hi
    return lo, hi


class _EventLog:
    def __init__(self, dim: int, enabled: bool):
        self.enabled = enabled
        self.dim = dim
        self.batches: list[dict] = []

    def add(self, idx, time, kind, from_pos, to_pos, to_cell, to_label):
        if not self.enabled or idx.size == 0:
            return
        self.batches.append(
            dict(
                idx=idx.copy(),
                time=np.asarray(time, dtype=float).copy(),
                kind=np.asarray(kind, dtype=np.int8).copy(),
                from_pos=np.asarray(from_pos, dtype=float).copy(),
                to_pos=np.asarray(to_pos, dtype=float).copy(),
                to_cell=np.asarray(to_cell, dtype=np.int64).copy(),
                to_label=np.asarray(to_label, dtype=np.int8).copy(),
            )
        )


def simulate_coupled(
    partition: Partition, kernel: DiscreteKernel, u0: Field, config: SimConfig
) -> Ensemble:
    grid = partition.grid
    if kernel.grid != grid or u0.grid != grid:
        raise ComparisonError("partition, kernel, and initial density must share a grid")
    if config.brownian_substep is None:
        raise ConfigError("the pre-limit simulator needs brownian_substep")
    lo_tab, hi_tab = _component_tables(partition)
    min_width = float(np.min(hi_tab - lo_tab))
    if config.brownian_substep > min_width**2 / 16.0 * (1 + 1e-12):
        raise ConfigError(
            f"brownian_substep {config.brownian_substep} exceeds (min component width)^2/16 "
            f"= {min_width ** 2 / 16.0}"
        )
    snaps = _check_snapshots(config.snapshot_times, config.horizon)
    rng = np.random.Generator(np.random.Philox(config.seed))
    n = config.n_particles

    pos, cell = _sample_initial_positions(u0, n, rng)
    is_b_p = partition.is_b[cell].copy()
    comp = partition.cell_component[cell].copy()
    next_clock = rng.exponential(1.0, n)
    last_t = np.zeros(n)
    log = _EventLog(grid.dim, config.keep_event_log)
    initial = dict(position=pos.copy(), cell=cell.copy(), label=(1 + is_b_p).astype(np.int8))

    def _advance_brownian(idx, upto):
        """Diffuse B particles among idx up to times upto (callers set last_t)."""
        moving = idx[is_b_p[idx]]
        if moving.size == 0:
            return
        var = (upto if np.isscalar(upto) else upto[is_b_p[idx]]) - last_t[moving]
        var = np.maximum(var, 0.0)
        step = rng.standard_normal((moving.size, grid.dim)) * np.sqrt(var)[:, None]
        moved = reflect(pos[moving] + step, lo_tab[comp[moving]], hi_tab[comp[moving]])
        pos[moving] = moved
        newcell = grid.cell_of(moved)
        cell[moving] = newcell
        # rasterized-disc components may expose A cells inside the box
        is_b_p[moving] = partition.is_b[newcell]
        comp[moving] = partition.cell_component[newcell]

    out_pos = np.empty((snaps.size, n, grid.dim))
    out_lab = np.empty((snaps.size, n), dtype=np.int8)
    out_clk = np.empty((snaps.size, n))

    t_cur = 0.0
    delta = float(config.brownian_substep)
    for si, s in enumerate(snaps):
        while t_cur < s:
            t_next = min(t_cur + delta, s)
            while True:
                due = np.flatnonzero(next_clock <= t_next)
                if due.size == 0:
                    break
                tau = next_clock[due]
                _advance_brownian(due, tau)
                last_t[due] = tau
                from_pos = pos[due].copy()
                targets, tpos = kernel.sample_targets(cell[due], rng)
                suppressed = is_b_p[due] & partition.is_b[targets]
                movers = due[~suppressed]
                if movers.size:
                    pos[movers] = tpos[~suppressed]
                    cell[movers] = targets[~suppressed]
                    newb = partition.is_b[cell[movers]]
                    kind = np.where(newb != is_b_p[movers], _SWITCH, _JUMP)
                    is_b_p[movers] = newb
                    comp[movers] = partition.cell_component[cell[movers]]
                else:
                    kind = np.empty(0, dtype=np.int8)
                if log.enabled:
                    kinds = np.empty(due.size, dtype=np.int8)
                    kinds[suppressed] = _SUPPRESSED
                    kinds[~suppressed] = kind
                    log.add(due, tau, kinds, from_pos, pos[due], cell[due], 1 + is_b_p[due])
                next_clock[due] = tau + rng.exponential(1.0, due.size)
            _advance_brownian(np.arange(n), t_next)
            last_t[:] = t_next
            t_cur = t_next
        out_pos[si] = pos
        out_lab[si] = 1 + is_b_p
        out_clk[si] = next_clock - s
    metadata = dict(
        kind="coupled",
        seed=config.seed,
        n_particles=n,
        grid=grid,
        partition=partition,
        kernel=kernel,
        theta=partition.theta,
        config=config,
    )
    return Ensemble("coupled", snaps, out_pos, out_lab, out_clk, metadata, log.batches if log.enabled else None, initial)


def simulate_limit(theta: Field, kernel: DiscreteKernel, u0: Field, config: SimConfig) -> Ensemble:
    grid = theta.grid
    if kernel.grid != grid or u0.grid != grid:
        raise ComparisonError("theta, kernel, and initial density must share a grid")
    th = theta.values
    if np.any(th <= 0) or np.any(th >= 1):
        raise ComparisonError("theta must lie strictly inside (0,1)")
    snaps = _check_snapshots(config.snapshot_times, config.horizon)
    rng = np.random.Generator(np.random.Philox(config.seed))
    n = config.n_particles

    pos, cell = _sample_initial_positions(u0, n, rng)
    label = np.where(rng.random(n) < 1.0 - th[cell], 1, 2).astype(np.int8)
    next_clock = rng.exponential(1.0, n)
    log = _EventLog(grid.dim, config.keep_event_log)
    initial = dict(position=pos.copy(), cell=cell.copy(), label=label.copy())

    out_pos = np.empty((snaps.size, n, grid.dim))
    out_lab = np.empty((snaps.size, n), dtype=np.int8)
    out_clk = np.empty((snaps.size, n))

    for si, s in enumerate(snaps):
        while True:
            due = np.flatnonzero(next_clock <= s)
            if due.size == 0:
                break
            tau = next_clock[due]
            from_pos = pos[due].copy()
            targets, tpos = kernel.sample_targets(cell[due], rng)
            th_y = th[targets]
            v = rng.random(due.size)
            white = label[due] == 1
            # white particles always move; the landing phase decides the label
            # black particles move only on an accepted (thinned) event
            accept = white | (v < 1.0 - th_y)
            new_label = np.where(white, np.where(v < th_y, 2, 1), 1).astype(np.int8)
            movers = due[accept]
            if movers.size:
                pos[movers] = tpos[accept]
                cell[movers] = targets[accept]
            old_label = label[due].copy()
            label[due[accept]] = new_label[accept]
            if log.enabled:
                kinds = np.full(due.size, _SUPPRESSED, dtype=np.int8)
                kinds[accept] = np.where(
                    label[due][accept] != old_label[accept], _SWITCH, _JUMP
                )
                log.add(due, tau, kinds, from_pos, pos[due], cell[due], label[due])
            next_clock[due] = tau + rng.exponential(1.0, due.size)
        out_pos[si] = pos
        out_lab[si] = label
        out_clk[si] = next_clock - s
    metadata = dict(
        kind="limit",
        seed=config.seed,
        n_particles=n,
        grid=grid,
        kernel=kernel,
        theta=np.asarray(th, dtype=float),
        config=config,
    )
    return Ensemble("limit", snaps, out_pos, out_lab, out_clk, metadata, log.batches if log.enabled else None, initial)


def empirical_density(ensemble: Ensemble, snapshot: int, grid: Grid) -> tuple[Field, Field, Field]:
    """Histogram densities (total, label 1, label 2); total has mass exactly 1."""
    if grid != ensemble.metadata["grid"]:
        raise ComparisonError("ensemble was generated on a different grid")
    pos = ensemble.positions[snapshot]
    lab = ensemble.labels[snapshot]
    t = float(ensemble.times[snapshot])
    cells = grid.cell_of(pos)
    n = ensemble.n_particles
    hd = grid.h**grid.dim
    scale = 1.0 / (n * hd)
    total = np.bincount(cells, minlength=grid.n_cells).astype(float) * scale
    lab1 = np.bincount(cells[lab == 1], minlength=grid.n_cells).astype(float) * scale
    lab2 = np.bincount(cells[lab == 2], minlength=grid.n_cells).astype(float) * scale
    return (
        Field(total, t, grid),
        Field(lab1, t, grid),
        Field(lab2, t, grid),
    )


def _cell_averages(f, label_value: int, grid: Grid) -> np.ndarray:
    """Per-cell average of f(., label) by 2-point Gauss quadrature per axis
    (exact through cubic polynomials, matching the in-cell uniform jitter)."""
    off = grid.h / (2.0 * math.sqrt(3.0))
    c = grid.cell_centers
    if grid.dim == 1:
        pts = [c + off, c - off]
    else:
        pts = [
            c + np.array([off, off]),
            c + np.array([off, -off]),
            c + np.array([-off, off]),
            c + np.array([-off, -off]),
        ]
    lab = np.full(grid.n_cells, label_value, dtype=np.int8)
    acc = np.zeros(grid.n_cells)
    for p in pts:
        acc += np.asarray(f(p, lab), dtype=float)
    return acc / len(pts)


def martingale_residuals(ensemble: Ensemble, f, t: float) -> np.ndarray:
    """Per-particle residuals f(X_t,I_t) - f(X_0,I_0) - int_0^t (Gf)(X_s,I_s) ds.

    The generator integral uses the same kernel rows, cell-uniform landing
    law, and theta values that drove the simulation, evaluated exactly on
    the piecewise-constant event history, so the mean residual is a pure
    Monte Carlo zero.
    """
    if ensemble.kind != "limit":
        raise DiagnosticError("martingale diagnostics are defined for limit ensembles")
    if ensemble.events is None:
        raise DiagnosticError(
            "martingale diagnostics need an event log; rerun with keep_event_log=True"
        )
    tmax = float(ensemble.times[-1])
    if t > tmax * (1 + 1e-12):
        raise DiagnosticError(f"t={t} exceeds the simulated horizon {tmax}")
    grid: Grid = ensemble.metadata["grid"]
    kernel: DiscreteKernel = ensemble.metadata["kernel"]
    th: np.ndarray = ensemble.metadata["theta"]

    avg1 = _cell_averages(f, 1, grid)
    avg2 = _cell_averages(f, 2, grid)
    row_sums = kernel.row_sums
    q1 = kernel.matvec((1.0 - th) * avg1 + th * avg2)
    q2 = kernel.matvec((1.0 - th) * avg1)
    k1mth = kernel.matvec(1.0 - th)

    n = ensemble.n_particles
    pos = ensemble.initial["position"].copy()
    cell = ensemble.initial["cell"].copy()
    label = ensemble.initial["label"].copy()
    # f may return a view into pos (e.g. a coordinate); copy before mutating
    f0 = np.array(f(pos, label), dtype=float, copy=True)

    def lf(idx):
        p, c, l = pos[idx], cell[idx], label[idx]
        fv = np.asarray(f(p, l), dtype=float)
        white = l == 1
        out = np.where(
            white,
            q1[c] - fv * row_sums[c],
            q2[c] - fv * k1mth[c],
        )
        return out

    all_idx = np.arange(n)
    lf_cur = lf(all_idx)
    t_last = np.zeros(n)
    acc = np.zeros(n)
    for batch in ensemble.events or []:
        sel = batch["time"] <= t
        if not np.any(sel):
            continue
        idx = batch["idx"][sel]
        tau = batch["time"][sel]
        acc[idx] += lf_cur[idx] * (tau - t_last[idx])
        t_last[idx] = tau
        changed = batch["kind"][sel] != _SUPPRESSED
        ch = idx[changed]
        if ch.size:
            pos[ch] = batch["to_pos"][sel][changed]
            cell[ch] = batch["to_cell"][sel][changed]
            label[ch] = batch["to_label"][sel][changed]
            lf_cur[ch] = lf(ch)
    acc += lf_cur * (t - t_last)
    ft = np.asarray(f(pos, label), dtype=float)
    return ft - f0 - acc


def martingale_residual(ensemble: Ensemble, f, t: float) -> float:
    """Sample mean of the per-particle martingale residuals at time t."""
    return float(np.mean(martingale_residuals(ensemble, f, t)))


def bin_probabilities(values: np.ndarray, grid: Grid, bins: int) -> np.ndarray:
    """Aggregate a per-cell density into bins^dim coarse boxes (probability
    per box); bins must divide the grid resolution."""
    if grid.m % bins != 0:
        raise ComparisonError(f"bins={bins} must divide m={grid.m}")
    f = grid.m // bins
    hd = grid.h**grid.dim
    if grid.dim == 1:
        return np.asarray(values, dtype=float).reshape(bins, f).sum(axis=1) * hd
    arr = np.asarray(values, dtype=float).reshape(grid.m, grid.m)  # [iy, ix]
    return arr.reshape(bins, f, bins, f).sum(axis=(1, 3)).ravel() * hd


def bin_counts(positions: np.ndarray, grid: Grid, bins: int) -> np.ndarray:
    idx = np.clip(np.floor(np.atleast_2d(positions) * bins).astype(np.int64), 0, bins - 1)
    if grid.dim == 1:
        flat = idx[:, 0]
    else:
        flat = idx[:, 1] * bins + idx[:, 0]
    return np.bincount(flat, minlength=bins**grid.dim)


def zscores(observed: np.ndarray, expected_prob: np.ndarray, n: int) -> np.ndarray:
    """Binomial z-score per bin; degenerate bins give 0 when they agree."""
    obs = np.asarray(observed, dtype=float)
    p = np.clip(np.asarray(expected_prob, dtype=float), 0.0, 1.0)
    var = n * p * (1.0 - p)
    z = np.zeros_like(p)
    ok = var > 0
    z[ok] = (obs[ok] - n * p[ok]) / np.sqrt(var[ok])
    exact = ~ok
    z[exact] = np.where(np.isclose(obs[exact], n * p[exact]), 0.0, np.inf)
    return z
