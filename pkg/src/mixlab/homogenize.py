"""Convergence experiments: weak gaps between the fine-scale flow and the
two-phase limit across a refinement sweep.

"Weak convergence" is operationalized as pairing against a finite
dictionary of smooth test functions with trapezoid-in-time, midpoint-in-
space quadrature; the gaps must shrink as the mixture refines.  The strip
geometry is run against two candidate limits, with and without the
surviving vertical diffusion, to exhibit why the vanishing-diameter
hypothesis matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coupled import Trajectory, assemble, integrate
from .errors import AlignmentError, ComparisonError, ConfigError
from .fields import Field, initial_field
from .geometry import (
    Grid,
    Partition,
    make_alternating_1d,
    make_balls,
    make_chessboard,
    make_grid,
    make_strips,
)
from .kernels import DiscreteKernel, KernelSpec, discretize
from .limit import (
    LimitTrajectory,
    initial_pair,
    integrate_limit,
    make_limit_operator,
)


@dataclass(frozen=True)
class TestFunction:
    """Smooth pairing function on the closed domain times [0, T]."""

    id: str
    evaluate: Callable  # (points (K,dim), t) -> (K,)
    dt_evaluate: Callable  # time derivative, same signature
    lipschitz_bound: float


def _static(fid: str, fn, lip: float) -> TestFunction:
    return TestFunction(
        id=fid,
        evaluate=lambda p, t, fn=fn: np.asarray(fn(p), dtype=float),
        dt_evaluate=lambda p, t: np.zeros(len(p)),
        lipschitz_bound=lip,
    )


def builtin_dictionary(dim: int, T: float = 1.0) -> list[TestFunction]:
    """Test dictionary: polynomials to second order plus cosine modes, and
    one time-tapered member that vanishes at T."""
    pi = math.pi
    fns = [
        _static("one", lambda p: np.ones(len(p)), 0.0),
        _static("x", lambda p: p[:, 0], 1.0),
    ]
    if dim == 2:
        fns.append(_static("y", lambda p: p[:, 1], 1.0))
    fns.append(_static("x2", lambda p: p[:, 0] ** 2, 2.0))
    if dim == 2:
        fns.append(_static("xy", lambda p: p[:, 0] * p[:, 1], math.sqrt(2.0)))
    fns.append(_static("cos_pi_x", lambda p: np.cos(pi * p[:, 0]), pi))
    if dim == 2:
        fns.append(_static("cos_pi_y", lambda p: np.cos(pi * p[:, 1]), pi))
        fns.append(
            _static(
                "cos_pi_x_cos_pi_y",
                lambda p: np.cos(pi * p[:, 0]) * np.cos(pi * p[:, 1]),
                pi,
            )
        )
    fns.append(
        TestFunction(
            id="taper_cos_pi_x",
            evaluate=lambda p, t: (1.0 - t / T) * np.cos(pi * p[:, 0]),
            dt_evaluate=lambda p, t: -np.cos(pi * p[:, 0]) / T,
            lipschitz_bound=pi,
        )
    )
    return fns


def vanishing_variant(tf: TestFunction, T: float) -> TestFunction:
    """Taper a test function linearly in time so it vanishes at T."""
    return TestFunction(
        id=tf.id + "_vanishing",
        evaluate=lambda p, t: (1.0 - t / T) * tf.evaluate(p, t),
        dt_evaluate=lambda p, t: -tf.evaluate(p, t) / T
        + (1.0 - t / T) * tf.dt_evaluate(p, t),
        lipschitz_bound=tf.lipschitz_bound,
    )


def project_piecewise_constant(
    phi: TestFunction, partition: Partition, grid: Grid, t: float
) -> Field:
    """Replace phi by its mean on every diffusive component, keep it
    pointwise elsewhere; the sup error is at most Lip(phi) * max_diam."""
    if partition.grid != grid:
        raise ComparisonError("partition was built on a different grid")
    vals = np.asarray(phi.evaluate(grid.cell_centers, t), dtype=float)
    out = vals.copy()
    comp = partition.cell_component
    bcells = comp >= 0
    if np.any(bcells):
        ncomp = len(partition.components)
        sums = np.bincount(comp[bcells], weights=vals[bcells], minlength=ncomp)
        counts = np.bincount(comp[bcells], minlength=ncomp)
        out[bcells] = (sums / counts)[comp[bcells]]
    return Field(out, t, grid)


def _trapezoid(values: np.ndarray, times: np.ndarray) -> float:
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


def weak_gap(
    u_traj: Trajectory,
    limit_traj: LimitTrajectory,
    phi: TestFunction,
    partition: Partition,
) -> tuple[float, float, float]:
    """Space-time pairings |int (u_n - (a+b)) phi|, and the same for the
    jump-side and diffusive-side portions against a and b."""
    grid = u_traj.grid
    if limit_traj.grid != grid or partition.grid != grid:
        raise ComparisonError("trajectories and partition must share a grid")
    if u_traj.times.shape != limit_traj.times.shape or not np.array_equal(
        u_traj.times, limit_traj.times
    ):
        raise ComparisonError("trajectories must share snapshot times")
    hd = grid.h**grid.dim
    mask_b = partition.is_b
    times = u_traj.times
    pair_u = np.empty(times.size)
    pair_a = np.empty(times.size)
    pair_b = np.empty(times.size)
    for i, t in enumerate(times):
        pv = np.asarray(phi.evaluate(grid.cell_centers, float(t)), dtype=float)
        u = u_traj.values[i]
        a = limit_traj.a_values[i]
        b = limit_traj.b_values[i]
        pair_u[i] = np.sum((u - (a + b)) * pv) * hd
        pair_a[i] = np.sum((np.where(mask_b, 0.0, u) - a) * pv) * hd
        pair_b[i] = np.sum((np.where(mask_b, u, 0.0) - b) * pv) * hd
    return (
        abs(_trapezoid(pair_u, times)),
        abs(_trapezoid(pair_a, times)),
        abs(_trapezoid(pair_b, times)),
    )


def weak_form_residual(
    u_traj: Trajectory,
    partition: Partition,
    kernel: DiscreteKernel,
    phi: TestFunction,
) -> float:
    """Integrated-by-parts balance of the jump-side density a_n = u_n on A:

        -int int (d phi_n/dt) a_n - int a_n(0) phi_n(.,0) - int int L[u] phi_n

    where L[u] is the jump flux felt on A-cells and phi_n is the component
    projection.  Zero for exact solutions up to quadrature error.
    """
    grid = u_traj.grid
    if partition.grid != grid or kernel.grid != grid:
        raise ComparisonError("trajectory, partition, and kernel must share a grid")
    times = u_traj.times
    if times[0] != 0.0:
        raise ComparisonError("weak-form residual needs the t=0 snapshot")
    T = float(times[-1])
    end_vals = np.asarray(phi.evaluate(grid.cell_centers, T), dtype=float)
    if np.max(np.abs(end_vals)) != 0.0:
        raise ConfigError(
            f"test function {phi.id!r} must vanish at T={T}; "
            "wrap it with vanishing_variant"
        )
    hd = grid.h**grid.dim
    mask_a = ~partition.is_b
    row_sums = kernel.row_sums
    dphi_term = np.empty(times.size)
    bilinear = np.empty(times.size)
    phi0 = None
    for i, t in enumerate(times):
        t = float(t)
        phin = project_piecewise_constant(phi, partition, grid, t).values
        dtf = TestFunction(phi.id, phi.dt_evaluate, phi.dt_evaluate, 0.0)
        dphin = project_piecewise_constant(dtf, partition, grid, t).values
        u = u_traj.values[i]
        an = np.where(mask_a, u, 0.0)
        dphi_term[i] = np.sum(an * dphin) * hd
        flux = kernel.matvec(u) - u * row_sums
        bilinear[i] = np.sum(np.where(mask_a, flux, 0.0) * phin) * hd
        if i == 0:
            phi0 = phin
    initial_term = float(np.sum(np.where(mask_a, u_traj.values[0], 0.0) * phi0) * hd)
    return -_trapezoid(dphi_term, times) - initial_term - _trapezoid(bilinear, times)


@dataclass(frozen=True)
class ResolutionRule:
    """Grid resolution as a function of the refinement index."""

    base: int
    cap: int

    def m_for(self, n: int) -> int:
        return min(self.base * n, self.cap)


def default_resolution_rule(dim: int) -> ResolutionRule:
    return ResolutionRule(base=64, cap=512) if dim == 1 else ResolutionRule(base=8, cap=96)


@dataclass(frozen=True)
class SweepRow:
    family: str
    n: int
    test_id: str
    gap_u: float
    gap_a: float
    gap_b: float
    weak_residual: float


@dataclass
class ConvergenceReport:
    rows: list[SweepRow]
    metadata: dict

    def select(self, family: str, test_id: str) -> list[SweepRow]:
        return [r for r in self.rows if r.family == family and r.test_id == test_id]

    def end_to_end_ratio(self, family: str, test_id: str, column: str = "gap_u"):
        """(gap at n_min, gap at n_max, ratio); ratio is nan when the first
        gap is exactly zero."""
        rows = self.select(family, test_id)
        if not rows:
            raise ComparisonError(f"no rows for family={family!r} test={test_id!r}")
        first = getattr(rows[0], column)
        last = getattr(rows[-1], column)
        ratio = last / first if first != 0.0 else math.nan
        return first, last, ratio


_FAMILY_DIM = {"alternating1d": 1, "chessboard": 2, "strips": 2, "balls": 2}


def _build_partition(family: str, n: int, grid: Grid, k: float, r: float) -> Partition:
    if family == "alternating1d":
        return make_alternating_1d(n, k, grid)
    if family == "chessboard":
        return make_chessboard(n, grid)
    if family == "strips":
        return make_strips(n, grid)
    if family == "balls":
        return make_balls(n, r, grid)
    raise ConfigError(f"unknown partition family {family!r}")


def run_sweep(
    family: str,
    n_list: Sequence[int],
    kernel_spec: KernelSpec,
    u0_name: str = "cosine-bump",
    u0_params: dict | None = None,
    T: float = 1.0,
    k: float = 0.5,
    r: float = 0.3,
    rule: ResolutionRule | None = None,
    cfl_factor: float = 0.5,
    n_snapshots: int = 11,
    dt_limit: float = 0.05,
) -> ConvergenceReport:
    """Fine-scale solve per n against a shared limit solve per resolution.

    Emits one row per (n, test function); the strip geometry emits rows for
    both candidate limits under families "strips" and "strips_nodiffusion".
    """
    if family not in _FAMILY_DIM:
        raise ConfigError(f"unknown partition family {family!r}")
    if len(n_list) == 0:
        raise ConfigError("n_list must not be empty")
    if T <= 0:
        raise ConfigError(f"T must be positive, got {T}")
    dim = _FAMILY_DIM[family]
    rule = rule or default_resolution_rule(dim)

    # validate every n up front so alignment problems surface before any solve
    entries = []
    for n in sorted(n_list):
        grid = make_grid(dim, rule.m_for(n))
        entries.append((n, grid, _build_partition(family, n, grid, k, r)))

    snapshots = np.linspace(0.0, T, n_snapshots)
    dictionary = builtin_dictionary(dim, T)
    variants = ("strip", "plain") if family == "strips" else ("plain",)
    limit_cache: dict = {}
    rows: list[SweepRow] = []

    for n, grid, partition in entries:
        kernel = discretize(kernel_spec, grid)
        u0 = initial_field(grid, u0_name, u0_params)
        op = assemble(partition, kernel, grid)
        dt = cfl_factor * grid.h**2
        traj = integrate(op, u0, T, dt, snapshots, cfl_factor=cfl_factor)
        theta = Field(partition.theta.copy(), 0.0, grid)
        residuals = {
            tf.id: weak_form_residual(
                traj,
                partition,
                kernel,
                tf
                if np.max(np.abs(tf.evaluate(grid.cell_centers, T))) == 0.0
                else vanishing_variant(tf, T),
            )
            for tf in dictionary
        }
        for variant in variants:
            key = (grid.m, variant, partition.theta.tobytes())
            if key not in limit_cache:
                lop = make_limit_operator(theta, kernel, strip_mode=(variant == "strip"))
                ldt = min(dt_limit, lop.dt_bound())
                limit_cache[key] = integrate_limit(
                    lop, initial_pair(theta, u0), T, ldt, snapshots
                )
            ltraj = limit_cache[key]
            fam_label = family
            if family == "strips":
                fam_label = "strips" if variant == "strip" else "strips_nodiffusion"
            for tf in dictionary:
                gu, ga, gb = weak_gap(traj, ltraj, tf, partition)
                rows.append(
                    SweepRow(fam_label, n, tf.id, gu, ga, gb, residuals[tf.id])
                )

    metadata = dict(
        family=family,
        n_list=[int(n) for n in sorted(n_list)],
        m_by_n={int(n): g.m for n, g, _ in entries},
        kernel=dict(
            family=kernel_spec.family,
            width=kernel_spec.width,
            sinkhorn_tol=kernel_spec.sinkhorn_tol,
        ),
        u0=dict(name=u0_name, params=dict(u0_params or {})),
        T=T,
        k=k if family == "alternating1d" else None,
        r=r if family == "balls" else None,
        cfl_factor=cfl_factor,
        dt_limit=dt_limit,
        n_snapshots=n_snapshots,
        tests=[tf.id for tf in dictionary],
    )
    return ConvergenceReport(rows=rows, metadata=metadata)
