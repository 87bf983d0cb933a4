"""Homogenized two-density system and its thin-strips variant.

The limit of the mixed evolution is a pair (a, b): a is the density that
still jumps, b the density stored in the vanishing local phase.  With
row-normalized kernel quadrature K v = W @ v the right-hand side reads

  da = K a - a * rowsum - theta * K a + (1 - theta) * K b
  db = theta * K a - b * K(1 - theta)            [+ (1/2) d^2b/dy^2 in strip mode]

Strip mode adds one-dimensional diffusion along y with zero-flux ends at
y = 0 and y = 1; it is the limit of full-height vertical strips, whose
component diameters do not vanish.  The coefficient 1/2 matches the local
phase: each strip runs unit-rate diffusion (generator (1/2) Laplacian), the
strips are constant in x, and averaging over x leaves the y-generator
untouched.  Concretely, for x-constant data the strip system with (1/2)
reproduces the two-phase fine dynamics exactly at every n, which is how the
convergence tests pin this constant.

The canonical initial split of a density u0 is a = (1 - theta) u0,
b = theta u0; integrate_limit accepts any pair, which the mass-exchange
experiments use to start off balance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coupled import Trajectory, _check_snapshots, march
from .errors import ComparisonError, StabilityError
from .fields import Field
from .geometry import Grid
from .kernels import DiscreteKernel

PURE_JUMP_DT_BOUND = 0.25
STRIP_CFL = 0.2


@dataclass(frozen=True)
class DensityPair:
    a: Field
    b: Field

    def __post_init__(self):
        if self.a.grid != self.b.grid:
            raise ComparisonError("pair densities live on different grids")
        if self.a.t != self.b.t:
            raise ComparisonError("pair densities carry different time stamps")

    @property
    def t(self) -> float:
        return self.a.t

    @property
    def grid(self) -> Grid:
        return self.a.grid


def initial_pair(theta: Field, u0: Field) -> DensityPair:
    """Canonical split: the nonlocal phase starts with (1-theta) u0."""
    if theta.grid != u0.grid:
        raise ComparisonError("theta and u0 live on different grids")
    th = theta.values
    return DensityPair(
        a=Field((1.0 - th) * u0.values, u0.t, u0.grid),
        b=Field(th * u0.values, u0.t, u0.grid),
    )


def _strip_laplacian(grid: Grid) -> sp.csr_matrix:
    """(1/2) second difference along y with mirrored ends, on the full grid."""
    m = grid.m
    n = grid.n_cells
    c = 0.5 * m * m
    rows, cols, vals = [], [], []
    flat = np.arange(n, dtype=np.int64)
    iy = flat // m
    up_ok = iy < m - 1
    a = flat[up_ok]
    b = a + m
    rows.extend([a, b, a, b])
    cols.extend([b, a, a, b])
    vals.extend([np.full(a.size, c), np.full(a.size, c),
                 np.full(a.size, -c), np.full(a.size, -c)])
    lap = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    lap.sum_duplicates()
    return lap


@dataclass
class LimitOperator:
    grid: Grid
    kernel: DiscreteKernel
    theta: np.ndarray
    strip_mode: bool
    row_sums: np.ndarray
    k_one_minus_theta: np.ndarray   # W @ (1 - theta)
    strip_lap: sp.csr_matrix | None

    def rhs(self, s: np.ndarray) -> np.ndarray:
        """Stacked right-hand side; s holds a then b."""
        n = self.grid.n_cells
        a, b = s[:n], s[n:]
        ka = self.kernel.matvec(a)
        kb = self.kernel.matvec(b)
        th = self.theta
        da = ka - a * self.row_sums - th * ka + (1.0 - th) * kb
        db = th * ka - b * self.k_one_minus_theta
        if self.strip_mode:
            db = db + self.strip_lap @ b
        return np.concatenate([da, db])

    def dt_bound(self) -> float:
        if self.strip_mode:
            return STRIP_CFL * self.grid.h * self.grid.h
        return PURE_JUMP_DT_BOUND


def make_limit_operator(
    theta: Field, kernel: DiscreteKernel, strip_mode: bool = False
) -> LimitOperator:
    grid = theta.grid
    if kernel.grid != grid:
        raise ComparisonError("theta and kernel must share a grid")
    th = np.asarray(theta.values, dtype=float)
    if np.any(th <= 0) or np.any(th >= 1):
        raise ComparisonError("theta must lie strictly inside (0,1) on every cell")
    if strip_mode and grid.dim != 2:
        raise ComparisonError("strip mode needs a 2-d grid")
    n = grid.n_cells
    return LimitOperator(
        grid=grid,
        kernel=kernel,
        theta=th,
        strip_mode=strip_mode,
        row_sums=kernel.matvec(np.ones(n)),
        k_one_minus_theta=kernel.matvec(1.0 - th),
        strip_lap=_strip_laplacian(grid) if strip_mode else None,
    )


def apply_limit_rhs(op: LimitOperator, s: DensityPair) -> tuple[Field, Field]:
    if s.grid != op.grid:
        raise ComparisonError("density pair lives on a different grid than the operator")
    out = op.rhs(np.concatenate([s.a.values, s.b.values]))
    n = op.grid.n_cells
    return Field(out[:n], s.t, op.grid), Field(out[n:], s.t, op.grid)


@dataclass(frozen=True)
class LimitTrajectory:
    times: np.ndarray
    a_values: np.ndarray   # (S, n_cells)
    b_values: np.ndarray
    grid: Grid

    @property
    def n_snapshots(self) -> int:
        return int(self.times.size)

    def pair(self, i: int) -> DensityPair:
        t = float(self.times[i])
        return DensityPair(
            a=Field(self.a_values[i], t, self.grid),
            b=Field(self.b_values[i], t, self.grid),
        )

    def total(self) -> Trajectory:
        return Trajectory(times=self.times, values=self.a_values + self.b_values, grid=self.grid)


def integrate_limit(
    op: LimitOperator, s0: DensityPair, T: float, dt: float, snapshots
) -> LimitTrajectory:
    if s0.grid != op.grid:
        raise ComparisonError("initial pair lives on a different grid than the operator")
    if T <= 0:
        raise StabilityError(f"horizon T must be positive, got {T}")
    bound = op.dt_bound()
    if dt <= 0 or dt > bound * (1 + 1e-12):
        kind = "strip-mode" if op.strip_mode else "pure-jump"
        raise StabilityError(f"dt={dt} violates the {kind} step bound {bound}")
    snaps = _check_snapshots(snapshots, T)
    stacked0 = np.concatenate([s0.a.values, s0.b.values])
    out = march(op.rhs, stacked0, dt, snaps)
    n = op.grid.n_cells
    return LimitTrajectory(times=snaps, a_values=out[:, :n], b_values=out[:, n:], grid=op.grid)


def mass_pair(s: DensityPair) -> tuple[float, float]:
    hd = s.grid.h**s.grid.dim
    return float(np.sum(s.a.values)) * hd, float(np.sum(s.b.values)) * hd
