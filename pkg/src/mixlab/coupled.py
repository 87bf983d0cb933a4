"""Pre-limit evolution: jumps everywhere, diffusion inside B components.

The generator acts on a cell field u as

  A cells:  sum_j W[i][j] (u_j - u_i)                    (all jumps allowed)
  B cells:  sum_{j in A} W[i][j] (u_j - u_i) + (1/2) lap_c u   (jumps into B suppressed)

where lap_c is the 3/5-point Laplacian restricted to each B component with
mirrored-ghost (zero flux) closure on the component boundary, including
where a component touches the domain boundary.  Jump weights between two B
cells vanish symmetrically, so the combined weight matrix stays symmetric
and total mass is conserved.

Time stepping is classical explicit 4-stage Runge-Kutta with a step bound
dt <= cfl_factor * h^2; the integrator refuses to start above the bound and
asserts the L2 norm stays nonincreasing while it runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ComparisonError, StabilityError
from .fields import Field, l2_norm, total_mass  # noqa: F401  (re-exported surface)
from .geometry import Grid, Partition
from .kernels import DiscreteKernel

DEFAULT_CFL = 0.2


def _component_edges(partition: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Adjacent same-component cell pairs (each unordered pair once)."""
    grid = partition.grid
    m = grid.m
    comp = partition.cell_component
    ia, ib = [], []
    for c in partition.components:
        cells = c.cells
        if grid.dim == 1:
            right = cells + 1
            ok = (right < grid.n_cells) & ((cells + 1) % m != 0)
        else:
            right = cells + 1
            ok = (cells % m) != m - 1
        ok &= np.where(ok, comp[np.minimum(right, grid.n_cells - 1)] == comp[cells], False)
        ia.append(cells[ok])
        ib.append(right[ok])
        if grid.dim == 2:
            up = cells + m
            ok = up < grid.n_cells
            ok &= np.where(ok, comp[np.minimum(up, grid.n_cells - 1)] == comp[cells], False)
            ia.append(cells[ok])
            ib.append(up[ok])
    if not ia:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(ia), np.concatenate(ib)


@dataclass
class CoupledOperator:
    grid: Grid
    partition: Partition
    kernel: DiscreteKernel
    lap: sp.csr_matrix          # the (1/2) component Laplacian, zero on A rows
    mask_a: np.ndarray          # float 1.0 on A cells
    row_sums: np.ndarray        # W @ 1
    row_a: np.ndarray           # W @ chi_A
    edges: tuple[np.ndarray, np.ndarray]

    def apply_values(self, u: np.ndarray) -> np.ndarray:
        ku = self.kernel.matvec(u)
        kua = self.kernel.matvec(u * self.mask_a)
        out_a = ku - u * self.row_sums
        out_b = kua - u * self.row_a + self.lap @ u
        return np.where(self.partition.is_b, out_b, out_a)

    def apply_generator(self, u: Field) -> Field:
        return Field(self.apply_values(u.values), u.t, self.grid)


def assemble(partition: Partition, kernel: DiscreteKernel, grid: Grid) -> CoupledOperator:
    if partition.grid != grid or kernel.grid != grid:
        raise ComparisonError(
            "partition, kernel, and grid must all share the same discretization"
        )
    n = grid.n_cells
    ia, ib = _component_edges(partition)
    c = 0.5 * grid.m * grid.m  # exact for any m with m^2/2 below 2^53
    rows = np.concatenate([ia, ib, ia, ib])
    cols = np.concatenate([ib, ia, ia, ib])
    vals = np.concatenate([np.full(ia.size, c), np.full(ia.size, c),
                           np.full(ia.size, -c), np.full(ia.size, -c)])
    lap = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    lap.sum_duplicates()
    mask_a = (~partition.is_b).astype(float)
    row_sums = kernel.matvec(np.ones(n))
    row_a = kernel.matvec(mask_a)
    return CoupledOperator(
        grid=grid,
        partition=partition,
        kernel=kernel,
        lap=lap,
        mask_a=mask_a,
        row_sums=row_sums,
        row_a=row_a,
        edges=(ia, ib),
    )


def energy(op: CoupledOperator, u: Field) -> float:
    """Dirichlet-type energy: gradient part over B plus jump pair terms.

    Pair terms carry the kernel quadrature weight already inside W; the
    gradient part carries the cell measure h^dim.  B-to-B pairs are
    excluded, matching the suppressed jumps.
    """
    v = u.values
    is_b = op.partition.is_b
    chi_b = is_b.astype(float)
    wu = op.kernel.matvec(v) - chi_b * op.kernel.matvec(v * chi_b)
    wrow = op.row_sums - chi_b * op.kernel.matvec(chi_b)
    pair = 0.5 * (float(np.sum(v * v * wrow)) - float(np.dot(v, wu)))
    ia, ib = op.edges
    grid = op.grid
    if ia.size:
        diff = v[ia] - v[ib]
        grad = 0.25 * grid.h**grid.dim * float(np.sum(diff * diff)) / (grid.h * grid.h)
    else:
        grad = 0.0
    return pair + grad


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray     # (S,)
    values: np.ndarray    # (S, n_cells)
    grid: Grid

    @property
    def n_snapshots(self) -> int:
        return int(self.times.size)

    def field(self, i: int) -> Field:
        return Field(self.values[i], float(self.times[i]), self.grid)


def _check_snapshots(snapshots, T: float) -> np.ndarray:
    s = np.asarray(sorted(set(float(t) for t in snapshots)), dtype=float)
    if s.size == 0:
        raise ComparisonError("at least one snapshot time is required")
    if s[0] < 0 or s[-1] > T * (1 + 1e-12):
        raise ComparisonError(f"snapshot times must lie in [0, T={T}]")
    return s


def _rk4_step(rhs, u: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(u)
    k2 = rhs(u + (0.5 * dt) * k1)
    k3 = rhs(u + (0.5 * dt) * k2)
    k4 = rhs(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def march(rhs, u0: np.ndarray, dt: float, snapshots: np.ndarray, on_snapshot=None):
    """Shared snapshot-exact RK4 march; the final substep before each
    snapshot shrinks so snapshots are hit exactly."""
    u = u0.copy()
    t = 0.0
    out = np.empty((snapshots.size, u0.size))
    for si, s in enumerate(snapshots):
        steps = 0
        while s - t > 0:
            rem = s - t
            if rem > dt * (1 + 1e-9):
                u = _rk4_step(rhs, u, dt)
                t += dt
            else:
                u = _rk4_step(rhs, u, rem)
                t = s
            steps += 1
        out[si] = u
        if on_snapshot is not None:
            on_snapshot(si, u, steps)
    return out


def integrate(
    op: CoupledOperator,
    u0: Field,
    T: float,
    dt: float,
    snapshots,
    cfl_factor: float = DEFAULT_CFL,
) -> Trajectory:
    if u0.grid != op.grid:
        raise ComparisonError("initial field lives on a different grid than the operator")
    if T <= 0:
        raise StabilityError(f"horizon T must be positive, got {T}")
    bound = cfl_factor * op.grid.h * op.grid.h
    if dt <= 0 or dt > bound * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt} violates the stability bound {cfl_factor} * h^2 = {bound}"
        )
    snaps = _check_snapshots(snapshots, T)
    hd = op.grid.h**op.grid.dim
    state = {"l2": math.sqrt(float(np.sum(u0.values**2)) * hd)}

    def check(si: int, u: np.ndarray, steps: int) -> None:
        l2 = math.sqrt(float(np.sum(u * u)) * hd)
        if l2 > state["l2"] + 1e-12 * max(steps, 1):
            raise StabilityError(
                f"L2 norm grew from {state['l2']} to {l2} by t={snaps[si]}; "
                "the step size is too large for this operator"
            )
        state["l2"] = l2

    values = march(op.apply_values, u0.values, dt, snaps, on_snapshot=check)
    return Trajectory(times=snaps, values=values, grid=op.grid)
