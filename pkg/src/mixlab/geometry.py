"""Grids and two-phase partitions of the unit interval and unit square.

The domain [0,1]^dim is covered by m^dim congruent cells with centers at
(i + 1/2) h, h = 1/m.  A partition tags every cell A (jump medium) or B
(diffusive medium) and records the connected components of the B region,
the local volume fraction theta carried by the family, and the largest
component diameter.  Families are built so that cell boundaries coincide
with the analytic interfaces; misaligned requests fail loudly rather than
silently rounding.

Flat cell indexing is x-fastest: in 2-d, flat = iy * m + ix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigError, ResolutionError

_MAX_RESOLUTION = {1: 4096, 2: 512}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform midpoint grid on [0,1]^dim."""

    dim: int
    m: int
    h: float
    # derived from (dim, m); excluded so distinct instances compare equal
    cell_centers: np.ndarray = field(compare=False, repr=False)

    @property
    def n_cells(self) -> int:
        return self.m**self.dim

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Flat cell index containing each point; boundary points clip inward."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.clip(np.floor(pts * self.m).astype(np.int64), 0, self.m - 1)
        if self.dim == 1:
            return idx[:, 0]
        return idx[:, 1] * self.m + idx[:, 0]

    def axis_centers(self) -> np.ndarray:
        return (np.arange(self.m) + 0.5) * self.h


def make_grid(dim: int, m: int) -> Grid:
    if dim not in (1, 2):
        raise ResolutionError(f"dim must be 1 or 2, got {dim}")
    if m < 2:
        raise ResolutionError(f"resolution m must be at least 2, got {m}")
    if m > _MAX_RESOLUTION[dim]:
        raise ResolutionError(
            f"resolution m={m} exceeds the desk-scale cap {_MAX_RESOLUTION[dim]} for dim={dim}"
        )
    h = 1.0 / m
    if dim == 1:
        centers = ((np.arange(m) + 0.5) * h)[:, None]
    else:
        ax = (np.arange(m) + 0.5) * h
        xs, ys = np.meshgrid(ax, ax, indexing="xy")  # xs varies fastest in flat order
        centers = np.column_stack([xs.ravel(), ys.ravel()])
    return Grid(dim=dim, m=m, h=h, cell_centers=_readonly(centers))


@dataclass(frozen=True)
class Component:
    """One connected component of the B region, as a set of cells.

    idx_lo/idx_hi are inclusive integer cell-index corners of the bounding
    box; lo/hi the corresponding region corners.  filled marks components
    whose cells tile the whole bounding box (true for every family except
    rasterized balls).
    """

    cells: np.ndarray      # sorted flat indices, read-only
    idx_lo: tuple[int, ...]
    idx_hi: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    diameter: float
    filled: bool

    @property
    def n_cells(self) -> int:
        return int(self.cells.size)


def _unflatten(flat: np.ndarray, dim: int, m: int) -> np.ndarray:
    if dim == 1:
        return flat[:, None]
    return np.column_stack([flat % m, flat // m])


def _component_from_cells(flat: np.ndarray, grid: Grid) -> Component:
    flat = np.sort(np.asarray(flat, dtype=np.int64))
    idx = _unflatten(flat, grid.dim, grid.m)
    lo_i = idx.min(axis=0)
    hi_i = idx.max(axis=0)
    extent_cells = hi_i - lo_i + 1
    filled = flat.size == int(np.prod(extent_cells))
    h = grid.h
    if filled:
        # diameter of a full rectangle of cells is its diagonal
        diam = math.sqrt(float(np.sum((extent_cells * h) ** 2)))
    else:
        # exact diameter of a union of cells: farthest corner pair, computed
        # from integer index differences so the result is order-independent
        d = np.abs(idx[:, None, :] - idx[None, :, :]) + 1
        diam = h * math.sqrt(float(np.max(np.sum(d.astype(float) ** 2, axis=2))))
    return Component(
        cells=_readonly(flat),
        idx_lo=tuple(int(v) for v in lo_i),
        idx_hi=tuple(int(v) for v in hi_i),
        lo=tuple(float(v * h) for v in lo_i),
        hi=tuple(float((v + 1) * h) for v in hi_i),
        diameter=float(diam),
        filled=bool(filled),
    )


@dataclass(frozen=True)
class Partition:
    """Two-phase labeling of a grid with B-component structure."""

    family: str
    n: int
    grid: Grid
    is_b: np.ndarray                    # bool per cell, read-only
    components: tuple[Component, ...]
    theta: np.ndarray                   # per-cell local volume fraction
    max_diam: float
    k: float | None = None
    r: float | None = None
    cell_component: np.ndarray | None = field(default=None, repr=False)  # -1 on A cells

    @property
    def labels(self) -> np.ndarray:
        return np.where(self.is_b, "B", "A")

    def b_measure(self) -> float:
        return float(np.count_nonzero(self.is_b)) * self.grid.h**self.grid.dim

    def summary(self) -> dict:
        rec = {
            "family": self.family,
            "n": self.n,
            "dim": self.grid.dim,
            "m": self.grid.m,
            "theta": float(self.theta[0]) if np.ptp(self.theta) == 0 else "varying",
            "b_measure": self.b_measure(),
            "n_components": len(self.components),
            "max_diam": self.max_diam,
        }
        if self.k is not None:
            rec["k"] = self.k
        if self.r is not None:
            rec["r"] = self.r
        return rec


def _finish_partition(
    family: str,
    n: int,
    grid: Grid,
    is_b: np.ndarray,
    comp_cells: list[np.ndarray],
    theta_value: float,
    k: float | None = None,
    r: float | None = None,
) -> Partition:
    components = tuple(_component_from_cells(c, grid) for c in comp_cells)
    covered = np.zeros(grid.n_cells, dtype=bool)
    cell_component = np.full(grid.n_cells, -1, dtype=np.int64)
    for ci, comp in enumerate(components):
        if covered[comp.cells].any():
            raise AlignmentError("component cell sets overlap")
        covered[comp.cells] = True
        cell_component[comp.cells] = ci
    if not np.array_equal(covered, is_b):
        raise AlignmentError("components do not cover exactly the B cells")
    if not 0.0 < theta_value < 1.0:
        raise AlignmentError(f"local fraction must lie strictly in (0,1), got {theta_value}")
    theta = np.full(grid.n_cells, float(theta_value))
    return Partition(
        family=family,
        n=n,
        grid=grid,
        is_b=_readonly(is_b),
        components=components,
        theta=_readonly(theta),
        max_diam=max(c.diameter for c in components),
        k=k,
        r=r,
        cell_component=_readonly(cell_component),
    )


def make_alternating_1d(n: int, k: float, grid: Grid) -> Partition:
    """n subintervals of [0,1], each split into an A part (left, measure
    (1-k)/n) and a B part (right, measure k/n)."""
    if grid.dim != 1:
        raise AlignmentError("alternating1d needs a 1-d grid")
    if not 0.0 < k < 1.0:
        raise ConfigError(f"volume fraction k must lie in (0,1), got {k}")
    if n < 1:
        raise AlignmentError(f"refinement index n must be positive, got {n}")
    m = grid.m
    if m % n != 0:
        raise AlignmentError(f"m={m} must be divisible by n={n}")
    c = m // n
    cb_exact = k * c
    cb = int(round(cb_exact))
    if abs(cb_exact - cb) > 1e-9:
        raise AlignmentError(
            f"k*m/n = {cb_exact} must be an integer so cell boundaries match interfaces"
        )
    if not 1 <= cb <= c - 1:
        raise AlignmentError(
            f"subinterval of {c} cells cannot hold {cb} B cells and a nonempty A part"
        )
    is_b = np.zeros(m, dtype=bool)
    comp_cells = []
    for j in range(n):
        start = j * c + (c - cb)
        cells = np.arange(start, (j + 1) * c, dtype=np.int64)
        is_b[cells] = True
        comp_cells.append(cells)
    return _finish_partition("alternating1d", n, grid, is_b, comp_cells, k, k=k)


def _square_blocks(n: int, grid: Grid) -> tuple[int, np.ndarray, np.ndarray]:
    if grid.dim != 2:
        raise AlignmentError("this family needs a 2-d grid")
    if n < 1:
        raise AlignmentError(f"refinement index n must be positive, got {n}")
    m = grid.m
    if m % n != 0:
        raise AlignmentError(f"m={m} must be divisible by n={n}")
    c = m // n
    flat = np.arange(m * m, dtype=np.int64)
    bx = (flat % m) // c
    by = (flat // m) // c
    return c, bx, by


def make_chessboard(n: int, grid: Grid) -> Partition:
    """n x n squares colored by coordinate parity; odd squares are B.

    The limit fraction is 1/2; note the two colors occupy equal area only
    for even n, which is what the convergence experiments use.
    """
    c, bx, by = _square_blocks(n, grid)
    if n < 2:
        raise AlignmentError("chessboard needs n >= 2 so both media are present")
    odd = ((bx + by) % 2).astype(bool)
    is_b = odd.copy()
    comp_cells = []
    for bj in range(n):
        for bi in range(n):
            if (bi + bj) % 2 == 1:
                sel = np.flatnonzero((bx == bi) & (by == bj))
                comp_cells.append(sel)
    return _finish_partition("chessboard", n, grid, is_b, comp_cells, 0.5)


def make_balls(n: int, r: float, grid: Grid) -> Partition:
    """A ball of radius r/n centered in each of the n^2 squares, rasterized
    by cell-center membership.  theta is the exact rasterized fraction."""
    if not 0.0 < r < 0.5:
        raise ConfigError(f"ball radius factor r must lie in (0, 1/2), got {r}")
    c, bx, by = _square_blocks(n, grid)
    m = grid.m
    # Offsets of cell centers from the square center have the exact form
    # ((2*li + 1)*n - m) / (2*m*n); membership reduces to integer arithmetic
    # against the threshold (2*m*r)^2, identical in every square.
    li = np.arange(c, dtype=np.int64)
    off = (2 * li + 1) * n - m
    d2 = off[None, :] ** 2 + off[:, None] ** 2  # (ly, lx)
    inside = d2.astype(float) <= (2.0 * m * r) ** 2
    count = int(np.count_nonzero(inside))
    if count == 0:
        raise AlignmentError(
            f"ball of radius {r}/{n} captures no cell centers at m={m}; refine the grid"
        )
    if count == c * c:
        raise AlignmentError("rasterized ball fills its whole square; shrink r or refine")
    ly, lx = np.nonzero(inside)
    is_b = np.zeros(m * m, dtype=bool)
    comp_cells = []
    for bj in range(n):
        for bi in range(n):
            cells = (bj * c + ly) * m + (bi * c + lx)
            cells = cells.astype(np.int64)
            is_b[cells] = True
            comp_cells.append(cells)
    theta = count / float(c * c)
    return _finish_partition("balls", n, grid, is_b, comp_cells, theta, r=r)


def make_strips(n: int, grid: Grid) -> Partition:
    """Full-height vertical strips of width 1/n, A on even strip index.

    Every B component has diameter above 1, so the vanishing-diameter
    hypothesis fails; this family exhibits the limit with residual
    diffusion along y.
    """
    if n < 2:
        raise AlignmentError("strips need n >= 2 so both media are present")
    c, bx, by = _square_blocks(n, grid)
    m = grid.m
    is_b = (bx % 2).astype(bool)
    comp_cells = []
    for s in range(1, n, 2):
        sel = np.flatnonzero(bx == s)
        comp_cells.append(sel)
    return _finish_partition("strips", n, grid, is_b, comp_cells, 0.5)


def weak_density_gap(partition: Partition, grid: Grid, phi) -> float:
    """|integral of chi_B * phi - integral of theta * phi| by midpoint
    quadrature; the surrogate for weak-star convergence of the indicator."""
    if partition.grid is not grid and partition.grid != grid:
        raise AlignmentError(
            f"partition grid (m={partition.grid.m}) differs from supplied grid (m={grid.m})"
        )
    vals = np.asarray(phi(grid.cell_centers), dtype=float)
    if vals.shape != (grid.n_cells,):
        raise AlignmentError("test function must return one value per cell center")
    hd = grid.h**grid.dim
    b_int = float(np.sum(vals[partition.is_b])) * hd
    t_int = float(np.sum(partition.theta * vals)) * hd
    return abs(b_int - t_int)
