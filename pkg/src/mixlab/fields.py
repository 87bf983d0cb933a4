"""Cell-valued fields and the built-in initial data.

A Field is a vector of per-cell values tied to a grid and a time stamp.
Mass and L2 norm use the midpoint quadrature weight h^dim throughout, so
they agree with the continuum functionals up to quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .geometry import Grid


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    t: float
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise ConfigError(
                f"field has {v.shape} values for a grid of {self.grid.n_cells} cells"
            )
        object.__setattr__(self, "values", v)

    def at_time(self, t: float) -> "Field":
        return replace(self, t=t)


def total_mass(u: Field) -> float:
    return float(np.sum(u.values)) * u.grid.h**u.grid.dim


def l2_norm(u: Field) -> float:
    return math.sqrt(float(np.sum(u.values**2)) * u.grid.h**u.grid.dim)


def uniform_density(grid: Grid) -> Field:
    return Field(np.ones(grid.n_cells), 0.0, grid)


def cosine_bump(grid: Grid, alpha: float = 0.5, axis: str = "both") -> Field:
    """1 + alpha * cos(pi x) in 1-d; in 2-d the axis argument picks
    cos(pi x), cos(pi y), or their product (the default)."""
    if not -1.0 < alpha < 1.0:
        raise ConfigError(f"cosine-bump amplitude must lie in (-1,1), got {alpha}")
    x = grid.cell_centers
    if grid.dim == 1:
        prof = np.cos(math.pi * x[:, 0])
    elif axis == "x":
        prof = np.cos(math.pi * x[:, 0])
    elif axis == "y":
        prof = np.cos(math.pi * x[:, 1])
    elif axis == "both":
        prof = np.cos(math.pi * x[:, 0]) * np.cos(math.pi * x[:, 1])
    else:
        raise ConfigError(f"cosine-bump axis must be x, y, or both, got {axis!r}")
    return Field(1.0 + alpha * prof, 0.0, grid)


def indicator_density(grid: Grid, lo, hi) -> Field:
    """Normalized indicator of an axis-aligned box, mass 1 by construction."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != (grid.dim,) or hi.shape != (grid.dim,):
        raise ConfigError("indicator box corners must match the grid dimension")
    if np.any(hi <= lo):
        raise ConfigError("indicator box must have positive extent on every axis")
    inside = np.ones(grid.n_cells, dtype=bool)
    for d in range(grid.dim):
        c = grid.cell_centers[:, d]
        inside &= (c >= lo[d]) & (c < hi[d])
    count = int(np.count_nonzero(inside))
    if count == 0:
        raise ConfigError("indicator box captures no cell centers; enlarge it or refine")
    vals = np.zeros(grid.n_cells)
    # normalize by covered cell measure so the discrete mass is exactly 1
    vals[inside] = 1.0 / (count * grid.h**grid.dim)
    return Field(vals, 0.0, grid)


_INITIAL_NAMES = ("uniform", "cosine-bump", "indicator")


def initial_field(grid: Grid, name: str, params: dict | None = None) -> Field:
    params = dict(params or {})
    if name == "uniform":
        _reject_unknown(params, ())
        return uniform_density(grid)
    if name == "cosine-bump":
        _reject_unknown(params, ("alpha", "axis"))
        return cosine_bump(grid, params.get("alpha", 0.5), params.get("axis", "both"))
    if name == "indicator":
        _reject_unknown(params, ("lo", "hi"))
        if "lo" not in params or "hi" not in params:
            raise ConfigError("indicator initial data needs lo and hi box corners")
        return indicator_density(grid, params["lo"], params["hi"])
    raise ConfigError(f"unknown initial data {name!r}; expected one of {_INITIAL_NAMES}")


def _reject_unknown(params: dict, allowed: tuple) -> None:
    extra = set(params) - set(allowed)
    if extra:
        raise ConfigError(f"unknown initial-data parameters {sorted(extra)}; allowed: {list(allowed)}")
