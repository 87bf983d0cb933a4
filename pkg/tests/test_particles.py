"""Particle simulators: reflection, invariants, histograms, martingale checks."""

import math

import numpy as np
import pytest

from mixlab.coupled import assemble, integrate
from mixlab.errors import ComparisonError, ConfigError, DiagnosticError
from mixlab.fields import Field, cosine_bump, uniform_density
from mixlab.geometry import make_alternating_1d, make_grid
from mixlab.kernels import KernelSpec, discretize
from mixlab.limit import initial_pair, integrate_limit, make_limit_operator
from mixlab.particles import (
    EVENT_KINDS,
    SimConfig,
    bin_counts,
    bin_probabilities,
    empirical_density,
    martingale_residual,
    martingale_residuals,
    reflect,
    simulate_coupled,
    simulate_limit,
    zscores,
)


def coupled_setup(m=16, n=2, n_particles=20_000, seed=7, horizon=1.0, log=False):
    grid = make_grid(1, m)
    part = make_alternating_1d(n, 0.5, grid)
    kern = discretize(KernelSpec(family="constant"), grid)
    u0 = uniform_density(grid)
    cfg = SimConfig(
        n_particles=n_particles,
        seed=seed,
        horizon=horizon,
        snapshot_times=(0.0, horizon),
        brownian_substep=1.0 / 512.0,
        keep_event_log=log,
    )
    return grid, part, kern, u0, cfg


def limit_setup(m=16, n_particles=20_000, seed=11, horizon=1.0, log=False, snaps=None):
    grid = make_grid(1, m)
    theta = Field(np.full(m, 0.5), 0.0, grid)
    kern = discretize(KernelSpec(family="constant"), grid)
    u0 = cosine_bump(grid, 0.5)
    cfg = SimConfig(
        n_particles=n_particles,
        seed=seed,
        horizon=horizon,
        snapshot_times=tuple(snaps) if snaps else (0.0, horizon),
        keep_event_log=log,
    )
    return grid, theta, kern, u0, cfg


# ---------------------------------------------------------------- reflection

def test_reflect_single_fold():
    assert reflect(np.array([0.65]), 0.0, 0.5) == pytest.approx(0.35, abs=1e-15)


def test_reflect_interior_unchanged():
    assert reflect(np.array([0.3]), 0.0, 0.5) == pytest.approx(0.3, abs=1e-15)


def test_reflect_double_fold():
    # -0.7 -> fold at 0 -> 0.7 -> fold at 0.5 -> 0.3
    assert reflect(np.array([-0.7]), 0.0, 0.5) == pytest.approx(0.3, abs=1e-15)


def test_reflect_vectorized_stays_inside():
    rng = np.random.Generator(np.random.Philox(0))
    p = rng.normal(0.0, 3.0, size=(1000, 2))
    lo = np.array([0.25, 0.0])
    hi = np.array([0.5, 1.0])
    out = reflect(p, lo, hi)
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


# ---------------------------------------------------------------- validation

def test_config_rejects_bad_counts():
    with pytest.raises(ConfigError):
        SimConfig(n_particles=0, seed=1, horizon=1.0, snapshot_times=(0.0, 1.0))
    with pytest.raises(ConfigError):
        SimConfig(n_particles=10, seed=1, horizon=-1.0, snapshot_times=(0.0,))


def test_coupled_substep_gate():
    grid, part, kern, u0, _ = coupled_setup()
    # min component width 0.25 -> bound 0.25^2/16 = 1/256
    cfg = SimConfig(
        n_particles=10, seed=1, horizon=0.1, snapshot_times=(0.0, 0.1),
        brownian_substep=1.0 / 128.0,
    )
    with pytest.raises(ConfigError):
        simulate_coupled(part, kern, u0, cfg)


def test_coupled_requires_substep():
    grid, part, kern, u0, _ = coupled_setup()
    cfg = SimConfig(n_particles=10, seed=1, horizon=0.1, snapshot_times=(0.0, 0.1))
    with pytest.raises(ConfigError):
        simulate_coupled(part, kern, u0, cfg)


def test_limit_theta_must_be_interior():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=10)
    bad = Field(np.full(grid.n_cells, 1.0), 0.0, grid)
    with pytest.raises(ComparisonError):
        simulate_limit(bad, kern, u0, cfg)


# ------------------------------------------------------------- t=0 histogram

def test_initial_positions_match_density():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=50_000, seed=3)
    ens = simulate_limit(theta, kern, u0, cfg)
    bins = 8
    counts = bin_counts(ens.positions[0], grid, bins)
    probs = bin_probabilities(u0.values, grid, bins)
    z = zscores(counts, probs, ens.n_particles)
    assert float(np.max(np.abs(z))) <= 3.0


def test_positions_stay_inside_domain():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=2000, seed=5)
    ens = simulate_coupled(part, kern, u0, cfg)
    assert np.all(ens.positions >= 0.0) and np.all(ens.positions <= 1.0)


# ------------------------------------------------------------- label algebra

def test_coupled_labels_follow_position():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=2000, seed=5)
    ens = simulate_coupled(part, kern, u0, cfg)
    for s in range(ens.n_snapshots):
        cells = grid.cell_of(ens.positions[s])
        assert np.array_equal(ens.labels[s], 1 + part.is_b[cells])


def test_no_accepted_jump_between_local_cells():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=2000, seed=9, log=True)
    ens = simulate_coupled(part, kern, u0, cfg)
    saw_suppressed = False
    for batch in ens.events:
        from_b = part.is_b[grid.cell_of(batch["from_pos"])]
        jump = batch["kind"] == 0
        # a plain jump keeps the label, so from B it could only go B -> B
        assert not np.any(jump & from_b)
        saw_suppressed |= bool(np.any(batch["kind"] == 1))
    assert saw_suppressed


def test_quiet_particles_hold_still():
    # a clock larger than the remaining window means no event: in the limit
    # process such particles must keep position and label bit for bit
    grid, theta, kern, u0, cfg = limit_setup(n_particles=5000, seed=13, snaps=(0.0, 0.5, 1.0))
    ens = simulate_limit(theta, kern, u0, cfg)
    quiet = ens.clocks[1] > 0.5
    assert np.any(quiet)
    assert np.array_equal(ens.positions[1][quiet], ens.positions[2][quiet])
    assert np.array_equal(ens.labels[1][quiet], ens.labels[2][quiet])


def test_quiet_jump_particles_hold_still_prelimit():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=5000, seed=13)
    ens = simulate_coupled(part, kern, u0, cfg)
    quiet = ens.clocks[0] > 1.0
    on_a = ens.labels[0] == 1
    hold = quiet & on_a
    moved = quiet & ~on_a
    assert np.any(hold) and np.any(moved)
    assert np.array_equal(ens.positions[0][hold], ens.positions[1][hold])
    # diffusing particles essentially never sit still over a unit window
    d = np.abs(ens.positions[1][moved] - ens.positions[0][moved])
    assert np.all(d > 0)


# ----------------------------------------------------------------- densities

def test_empirical_density_single_cell():
    grid = make_grid(1, 8)
    theta = Field(np.full(8, 0.5), 0.0, grid)
    kern = discretize(KernelSpec(family="constant"), grid)
    u0 = Field(np.eye(8)[3] * 8.0, 0.0, grid)  # all mass in cell 3
    cfg = SimConfig(n_particles=500, seed=2, horizon=0.1, snapshot_times=(0.0, 0.1))
    ens = simulate_limit(theta, kern, u0, cfg)
    total, lab1, lab2 = empirical_density(ens, 0, grid)
    assert total.values[3] == pytest.approx(8.0)
    assert float(np.sum(np.delete(total.values, 3))) == 0.0
    assert float(np.sum(total.values)) * grid.h == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(lab1.values + lab2.values, total.values)


def test_label_masses_against_limit_solver():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=50_000, seed=17, snaps=(0.0, 0.5, 1.0))
    ens = simulate_limit(theta, kern, u0, cfg)
    op = make_limit_operator(theta, kern)
    traj = integrate_limit(op, initial_pair(theta, u0), 1.0, 0.05, [0.0, 0.5, 1.0])
    for s in (1, 2):
        p1 = float(np.sum(traj.a_values[s])) * grid.h
        count1 = int(np.sum(ens.labels[s] == 1))
        z = (count1 - ens.n_particles * p1) / math.sqrt(ens.n_particles * p1 * (1 - p1))
        assert abs(z) <= 3.0


def test_local_phase_mass_against_coupled_solver():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=50_000, seed=19)
    ens = simulate_coupled(part, kern, u0, cfg)
    op = assemble(part, kern, grid)
    traj = integrate(op, u0, 1.0, 0.2 * grid.h**2, [0.0, 1.0])
    p2 = float(np.sum(traj.values[1][part.is_b])) * grid.h
    count2 = int(np.sum(ens.labels[1] == 2))
    z = (count2 - ens.n_particles * p2) / math.sqrt(ens.n_particles * p2 * (1 - p2))
    assert abs(z) <= 3.0


def test_stationary_half_labels():
    grid, theta, kern, _, cfg = limit_setup(n_particles=50_000, seed=23)
    ens = simulate_limit(theta, kern, uniform_density(grid), cfg)
    count1 = int(np.sum(ens.labels[1] == 1))
    z = (count1 - 0.5 * ens.n_particles) / math.sqrt(ens.n_particles * 0.25)
    assert abs(z) <= 3.0


# ---------------------------------------------------------------- martingale

def test_martingale_constant_function_exact_zero():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=200, seed=29, log=True)
    ens = simulate_limit(theta, kern, u0, cfg)
    res = martingale_residuals(ens, lambda p, l: np.ones(p.shape[0]), 1.0)
    assert np.all(res == 0.0)


@pytest.mark.parametrize(
    "name,f",
    [
        ("label", lambda p, l: l.astype(float)),
        ("coordinate", lambda p, l: p[:, 0]),
    ],
)
def test_martingale_mean_within_monte_carlo_error(name, f):
    grid, theta, kern, u0, cfg = limit_setup(n_particles=20_000, seed=31, log=True)
    ens = simulate_limit(theta, kern, u0, cfg)
    res = martingale_residuals(ens, f, 1.0)
    stderr = float(np.std(res)) / math.sqrt(res.size)
    assert abs(float(np.mean(res))) <= 3.0 * stderr


def test_martingale_needs_event_log():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=100)
    ens = simulate_limit(theta, kern, u0, cfg)
    with pytest.raises(DiagnosticError):
        martingale_residual(ens, lambda p, l: p[:, 0], 1.0)


def test_martingale_rejects_prelimit_ensemble():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=100, log=True)
    ens = simulate_coupled(part, kern, u0, cfg)
    with pytest.raises(DiagnosticError):
        martingale_residual(ens, lambda p, l: p[:, 0], 1.0)


def test_martingale_rejects_time_beyond_horizon():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=100, log=True)
    ens = simulate_limit(theta, kern, u0, cfg)
    with pytest.raises(DiagnosticError):
        martingale_residual(ens, lambda p, l: p[:, 0], 2.0)


# -------------------------------------------------------------- binning, z

def test_bin_probabilities_uniform():
    grid = make_grid(1, 8)
    out = bin_probabilities(np.ones(8), grid, 4)
    assert np.allclose(out, 0.25, atol=1e-15)
    with pytest.raises(ComparisonError):
        bin_probabilities(np.ones(8), grid, 3)


def test_bin_probabilities_2d_blocks():
    grid = make_grid(2, 4)
    v = np.zeros((4, 4))
    v[0, 0] = 16.0  # bottom-left cell
    out = bin_probabilities(v.ravel(), grid, 2)
    assert out[0] == pytest.approx(1.0)
    assert float(np.sum(out)) == pytest.approx(1.0)


def test_bin_counts_oracle():
    grid = make_grid(1, 8)
    pos = np.array([[0.1], [0.6], [0.9]])
    assert np.array_equal(bin_counts(pos, grid, 2), np.array([1, 2]))


def test_zscores_exact_and_degenerate():
    z = zscores(np.array([50.0, 0.0]), np.array([0.5, 0.0]), 100)
    assert z[0] == 0.0 and z[1] == 0.0
    z = zscores(np.array([1.0]), np.array([0.0]), 100)
    assert np.isinf(z[0])


# ------------------------------------------------------------- determinism

def test_same_seed_reproduces_ensemble():
    grid, part, kern, u0, cfg = coupled_setup(n_particles=1000, seed=37, log=True)
    e1 = simulate_coupled(part, kern, u0, cfg)
    e2 = simulate_coupled(part, kern, u0, cfg)
    assert np.array_equal(e1.positions, e2.positions)
    assert np.array_equal(e1.labels, e2.labels)
    assert np.array_equal(e1.clocks, e2.clocks)
    assert len(e1.events) == len(e2.events)


def test_different_seed_changes_ensemble():
    grid, theta, kern, u0, cfg = limit_setup(n_particles=1000, seed=41)
    cfg2 = SimConfig(
        n_particles=1000, seed=42, horizon=cfg.horizon,
        snapshot_times=cfg.snapshot_times,
    )
    e1 = simulate_limit(theta, kern, u0, cfg)
    e2 = simulate_limit(theta, kern, u0, cfg2)
    assert not np.array_equal(e1.positions, e2.positions)


def test_event_kind_names_stable():
    assert EVENT_KINDS == ("jump", "suppressed", "label-switch")
