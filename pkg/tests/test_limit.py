"""Two-density limit system: exchange dynamics, closed forms, strip mode."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mixlab.coupled import assemble, integrate
from mixlab.errors import ComparisonError, StabilityError
from mixlab.fields import Field, cosine_bump, uniform_density
from mixlab.geometry import make_alternating_1d, make_grid, make_strips
from mixlab.kernels import KernelSpec, discretize
from mixlab.limit import (
    DensityPair,
    apply_limit_rhs,
    initial_pair,
    integrate_limit,
    make_limit_operator,
    mass_pair,
)


def mass_ode_oracle(a0_mass: float, k: float, t: float) -> float:
    """Closed form of dA/dt = -kA + (1-k)B with A+B constant."""
    total = 1.0
    a_inf = (1 - k) * total
    return a_inf + (a0_mass - a_inf) * math.exp(-t)


def const_theta_op(grid, k: float, strip: bool = False):
    kern = discretize(KernelSpec(family="constant"), grid)
    theta = Field(np.full(grid.n_cells, k), 0.0, grid)
    return make_limit_operator(theta, kern, strip_mode=strip), theta


def test_rhs_constant_fields_substitution():
    grid = make_grid(1, 8)
    op, _ = const_theta_op(grid, 0.5)
    a0, b0 = 0.8, 0.2
    pair = DensityPair(Field(np.full(8, a0), 0.0, grid), Field(np.full(8, b0), 0.0, grid))
    da, db = apply_limit_rhs(op, pair)
    assert np.allclose(da.values, (b0 - a0) / 2, atol=1e-14)
    assert np.allclose(db.values, (a0 - b0) / 2, atol=1e-14)


def test_rhs_zero_on_zero():
    grid = make_grid(1, 8)
    op, _ = const_theta_op(grid, 0.3)
    z = Field(np.zeros(8), 0.0, grid)
    da, db = apply_limit_rhs(op, DensityPair(z, z))
    assert np.all(da.values == 0.0) and np.all(db.values == 0.0)


@given(
    ab=arrays(float, 16, elements=st.floats(min_value=-1, max_value=1, allow_nan=False)),
    kth=st.floats(min_value=0.1, max_value=0.9),
)
@settings(max_examples=30, deadline=None)
def test_rhs_mass_identity(ab, kth):
    grid = make_grid(1, 8)
    kern = discretize(KernelSpec(family="gaussian", width=0.25), grid)
    theta = Field(np.full(8, kth), 0.0, grid)
    op = make_limit_operator(theta, kern)
    pair = DensityPair(Field(ab[:8], 0.0, grid), Field(ab[8:], 0.0, grid))
    da, db = apply_limit_rhs(op, pair)
    assert abs(float(np.sum(da.values + db.values)) * grid.h) <= 1e-12


def test_mass_exchange_closed_form():
    grid = make_grid(1, 16)
    op, theta = const_theta_op(grid, 0.5)
    # off-balance start: A(0) = 0.3 instead of the canonical 0.5
    a0 = Field(np.full(16, 0.3), 0.0, grid)
    b0 = Field(np.full(16, 0.7), 0.0, grid)
    traj = integrate_limit(op, DensityPair(a0, b0), 2.0, 0.05, [0.0, 0.5, 1.0, 2.0])
    for i, t in enumerate([0.0, 0.5, 1.0, 2.0]):
        a_mass = float(np.sum(traj.a_values[i])) * grid.h
        assert abs(a_mass - mass_ode_oracle(0.3, 0.5, t)) <= 1e-6


def test_stationary_half_split():
    grid = make_grid(1, 8)
    op, theta = const_theta_op(grid, 0.5)
    s0 = initial_pair(theta, uniform_density(grid))
    traj = integrate_limit(op, s0, 1.0, 0.05, [0.0, 1.0])
    assert np.allclose(traj.a_values[1], 0.5, atol=1e-13)
    assert np.allclose(traj.b_values[1], 0.5, atol=1e-13)


def test_initial_split_masses():
    grid = make_grid(1, 8)
    theta = Field(np.full(8, 0.25), 0.0, grid)
    s0 = initial_pair(theta, uniform_density(grid))
    a, b = mass_pair(s0)
    assert a == pytest.approx(0.75, abs=1e-14)
    assert b == pytest.approx(0.25, abs=1e-14)


def test_combined_mass_conserved_along_trajectory():
    grid = make_grid(1, 16)
    kern = discretize(KernelSpec(family="gaussian", width=0.2), grid)
    theta = Field(np.linspace(0.2, 0.8, 16), 0.0, grid)
    op = make_limit_operator(theta, kern)
    s0 = initial_pair(theta, cosine_bump(grid, 0.5))
    traj = integrate_limit(op, s0, 1.0, 0.05, np.linspace(0, 1, 11))
    m0 = None
    for i in range(11):
        a = float(np.sum(traj.a_values[i])) * grid.h
        b = float(np.sum(traj.b_values[i])) * grid.h
        m0 = a + b if m0 is None else m0
        assert abs(a + b - m0) <= 1e-10


def test_reruns_bit_identical():
    grid = make_grid(1, 16)
    op, theta = const_theta_op(grid, 0.5)
    s0 = initial_pair(theta, cosine_bump(grid, 0.5))
    t1 = integrate_limit(op, s0, 1.0, 0.05, [0.0, 1.0])
    t2 = integrate_limit(op, s0, 1.0, 0.05, [0.0, 1.0])
    assert np.array_equal(t1.a_values, t2.a_values)
    assert np.array_equal(t1.b_values, t2.b_values)


def test_perturbation_within_gronwall_envelope():
    # continuity bound with C = 4 (1 + sup(J)^2 |Omega|^2) = 8 for the constant kernel
    grid = make_grid(1, 16)
    op, theta = const_theta_op(grid, 0.5)
    s0 = initial_pair(theta, uniform_density(grid))
    rng = np.random.Generator(np.random.Philox(2))
    delta = 1e-3 * rng.standard_normal(16)
    s1 = DensityPair(Field(s0.a.values + delta, 0.0, grid), s0.b)
    d0 = math.sqrt(float(np.sum(delta**2)) * grid.h)
    t0 = integrate_limit(op, s0, 1.0, 0.05, [0.0, 1.0])
    t1 = integrate_limit(op, s1, 1.0, 0.05, [0.0, 1.0])
    da = t1.a_values[1] - t0.a_values[1]
    db = t1.b_values[1] - t0.b_values[1]
    dist = math.sqrt(float(np.sum(da**2 + db**2)) * grid.h)
    assert dist <= d0 * math.exp(8.0)


def test_pure_jump_stability_gate():
    grid = make_grid(1, 8)
    op, theta = const_theta_op(grid, 0.5)
    s0 = initial_pair(theta, uniform_density(grid))
    with pytest.raises(StabilityError):
        integrate_limit(op, s0, 1.0, 0.3, [0.0, 1.0])


def test_strip_mode_needs_2d():
    grid = make_grid(1, 8)
    kern = discretize(KernelSpec(family="constant"), grid)
    theta = Field(np.full(8, 0.5), 0.0, grid)
    with pytest.raises(ComparisonError):
        make_limit_operator(theta, kern, strip_mode=True)


def test_strip_mode_stability_gate_and_mass():
    grid = make_grid(2, 8)
    op, theta = const_theta_op(grid, 0.5, strip=True)
    s0 = initial_pair(theta, cosine_bump(grid, 0.5, axis="y"))
    with pytest.raises(StabilityError):
        integrate_limit(op, s0, 1.0, 0.01, [0.0, 1.0])  # 0.01 > 0.2 h^2
    dt = 0.2 * grid.h * grid.h
    traj = integrate_limit(op, s0, 0.5, dt, [0.0, 0.5])
    m = (traj.a_values + traj.b_values).sum(axis=1) * grid.h**2
    assert abs(m[1] - m[0]) <= 1e-10


def test_strip_limit_reproduces_fine_system_for_x_constant_data():
    """For data constant in x, the full-height-strips fine system collapses to
    a two-field system in y that the strip-mode limit matches exactly: the
    jump-phase density is (1/2) u on A, the local-phase density (1/2) u on B.
    Any other diffusion coefficient breaks this identity at order one."""
    grid = make_grid(2, 16)
    part = make_strips(2, grid)
    kern = discretize(KernelSpec(family="constant"), grid)
    u0 = cosine_bump(grid, 0.5, axis="y")
    dt = 0.2 * grid.h * grid.h
    snaps = [0.0, 0.5, 1.0]

    fine = integrate(assemble(part, kern, grid), u0, 1.0, dt, snaps)
    op = make_limit_operator(Field(part.theta, 0.0, grid), kern, strip_mode=True)
    lim = integrate_limit(op, initial_pair(Field(part.theta, 0.0, grid), u0), 1.0, dt, snaps)

    for i in range(len(snaps)):
        u = fine.values[i]
        a, b = lim.a_values[i], lim.b_values[i]
        assert np.max(np.abs(2 * a[~part.is_b] - u[~part.is_b])) <= 1e-11
        assert np.max(np.abs(2 * b[part.is_b] - u[part.is_b])) <= 1e-11
