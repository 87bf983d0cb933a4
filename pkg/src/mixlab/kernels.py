"""Jump kernels discretized on the midpoint grid.

A kernel row i holds W[i][j] ~ J(x_i, x_j) h^dim, so that W @ v is the
midpoint quadrature of the integral of J(x_i, y) v(y).  The constant
family is exact without any correction; gaussian and bump evaluations are
brought to unit row sums by a symmetric diagonal (Sinkhorn) scaling so the
matrix stays symmetric.  Rows double as jump distributions for particle
sampling; any sub-tolerance residual row mass goes to the diagonal, which
is a no-op move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, NormalizationError, ResolutionError
from .geometry import Grid

_FAMILIES = ("constant", "gaussian", "bump")

# dense-matrix caps keep kernel matrices at desk scale
_KERNEL_RESOLUTION_CAP = {1: 512, 2: 96}


@dataclass(frozen=True)
class KernelSpec:
    family: str
    width: float | None = None
    sinkhorn_tol: float = 1e-12
    sinkhorn_max_iter: int = 10_000

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        if self.family != "constant":
            if self.width is None or not self.width > 0:
                raise ConfigError(f"{self.family} kernel needs a positive width")
        if not self.sinkhorn_tol <= 1e-8:
            raise ConfigError("sinkhorn_tol must be at most 1e-8")
        if self.sinkhorn_max_iter < 1:
            raise ConfigError("sinkhorn_max_iter must be positive")


def sinkhorn_normalize(M: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Symmetric diagonal scaling D M D with unit row sums.

    M must be square, nonnegative, symmetric, and irreducible as a
    nonnegative matrix; otherwise no such scaling exists and the call
    fails with a normalization error.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NormalizationError("matrix must be square")
    if np.any(M < 0):
        raise NormalizationError("matrix must be nonnegative")
    if not np.array_equal(M, M.T):
        raise NormalizationError("matrix must be symmetric")
    n = M.shape[0]
    if n > 1:
        ncomp, _ = connected_components(sp.csr_matrix(M > 0), directed=False)
        if ncomp > 1:
            raise NormalizationError(
                f"kernel support is disconnected ({ncomp} blocks); no doubly "
                "stochastic scaling exists"
            )
    d = np.ones(n)
    # iterate past the requested tolerance so the defect measured on the
    # assembled matrix (slightly different rounding) still clears it
    target = 0.25 * tol
    for _ in range(max_iter):
        r = d * (M @ d)
        if float(np.max(np.abs(r - 1.0))) <= target:
            break
        d = d / np.sqrt(r)
    else:
        raise NormalizationError(
            f"row normalization did not reach tol={tol} within {max_iter} iterations"
        )
    # d_i * d_j is computed first so W is symmetric to the last bit
    W = (d[:, None] * d[None, :]) * M
    defect = float(np.max(np.abs(W @ np.ones(n) - 1.0)))
    if defect > tol:
        raise NormalizationError(
            f"assembled row sums miss tolerance: defect {defect} > {tol}"
        )
    return W


class DiscreteKernel:
    """Quadrature matrix of a kernel on a grid, with sampling support."""

    def __init__(self, spec: KernelSpec, grid: Grid, W: np.ndarray | None, uniform_value: float | None):
        self.spec = spec
        self.grid = grid
        self._W = W
        self.uniform_value = uniform_value
        self._row_cdf: np.ndarray | None = None
        n = grid.n_cells
        if self.is_uniform:
            self.row_sums = np.full(n, n * uniform_value)
        else:
            self.row_sums = W @ np.ones(n)
        self.row_sum_defect = float(np.max(np.abs(self.row_sums - 1.0)))
        self.symmetry_defect = 0.0  # symmetric by construction

    @property
    def is_uniform(self) -> bool:
        return self.uniform_value is not None

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def W(self) -> np.ndarray:
        if self._W is None:
            self._W = np.full((self.n_cells, self.n_cells), self.uniform_value)
        return self._W

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """W @ v without materializing W for the uniform family."""
        if self.is_uniform:
            return np.full(self.n_cells, self.uniform_value * float(np.sum(v)))
        return self._W @ v

    def quadratic(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ self.matvec(v))

    @property
    def j_sup(self) -> float:
        """Sup of the underlying kernel values J = W / h^dim."""
        hd = self.grid.h**self.grid.dim
        if self.is_uniform:
            return self.uniform_value / hd
        return float(self._W.max()) / hd

    def _cdfs(self) -> np.ndarray:
        if self._row_cdf is None:
            self._row_cdf = np.cumsum(self.W, axis=1)
        return self._row_cdf

    def sample_targets(self, from_cells: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized draw of one target per source cell.

        Returns (target_cells, positions); positions are uniform inside the
        target cell.  Residual row mass below tolerance maps to the source
        cell itself, so a defect draw is a stay-put.
        """
        from_cells = np.asarray(from_cells, dtype=np.int64)
        k = from_cells.size
        u = rng.random(k)
        n = self.n_cells
        if self.is_uniform:
            targets = np.floor(u / self.uniform_value).astype(np.int64)
        else:
            cdfs = self._cdfs()
            targets = np.empty(k, dtype=np.int64)
            for out_i, c in enumerate(from_cells):
                targets[out_i] = np.searchsorted(cdfs[c], u[out_i], side="right")
        overflow = targets >= n
        if np.any(overflow):
            targets[overflow] = from_cells[overflow]
        jitter = rng.random((k, self.grid.dim)) - 0.5
        positions = self.grid.cell_centers[targets] + jitter * self.grid.h
        return targets, positions


def sample_target(kernel: DiscreteKernel, from_cell: int, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """Single jump draw from one source cell."""
    cells, pos = kernel.sample_targets(np.asarray([from_cell]), rng)
    return int(cells[0]), pos[0]


def discretize(spec: KernelSpec, grid: Grid) -> DiscreteKernel:
    cap = _KERNEL_RESOLUTION_CAP[grid.dim]
    if grid.m > cap:
        raise ResolutionError(
            f"kernel matrices are dense; m={grid.m} exceeds the documented cap {cap} for dim={grid.dim}"
        )
    hd = grid.h**grid.dim
    if spec.family == "constant":
        return DiscreteKernel(spec, grid, W=None, uniform_value=hd)

    x = grid.cell_centers
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    if spec.family == "gaussian":
        M = np.exp(-(dist**2) / (2.0 * spec.width**2)) * hd
    else:  # bump
        s = dist / spec.width
        M = np.zeros_like(dist)
        inside = s < 1.0
        M[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2)) * hd
    try:
        W = sinkhorn_normalize(M, spec.sinkhorn_tol, spec.sinkhorn_max_iter)
    except NormalizationError as err:
        raise NormalizationError(
            f"{spec.family} kernel with width {spec.width} could not be normalized on m={grid.m} "
            f"({err}); a larger width keeps the support connected across neighboring cells"
        ) from err
    return DiscreteKernel(spec, grid, W=W, uniform_value=None)
