"""Numerical laboratory for evolution problems that mix nonlocal jumps with
local diffusion on [0,1]^d, and for their homogenized two-density limits.

The pieces fit together in layers: geometry builds grids and two-phase
partitions, kernels discretizes jump kernels into doubly stochastic
matrices, coupled and limit integrate the fine-scale and limit densities,
particles runs the matching stochastic processes, homogenize measures weak
convergence gaps between the two scales, and io/cli move everything in and
out of CSV artifacts.
"""

from .coupled import CoupledOperator, Trajectory, assemble, energy, integrate
from .errors import (
    AlignmentError,
    ComparisonError,
    ConfigError,
    DiagnosticError,
    IOError_,
    MixLabError,
    NormalizationError,
    ResolutionError,
    StabilityError,
)
from .fields import Field, cosine_bump, indicator_density, initial_field, uniform_density
from .geometry import (
    Component,
    Grid,
    Partition,
    make_alternating_1d,
    make_balls,
    make_chessboard,
    make_grid,
    make_strips,
    weak_density_gap,
)
from .homogenize import (
    ConvergenceReport,
    ResolutionRule,
    SweepRow,
    TestFunction,
    builtin_dictionary,
    default_resolution_rule,
    project_piecewise_constant,
    run_sweep,
    vanishing_variant,
    weak_form_residual,
    weak_gap,
)
from .kernels import DiscreteKernel, KernelSpec, discretize, sinkhorn_normalize
from .limit import (
    DensityPair,
    LimitOperator,
    LimitTrajectory,
    initial_pair,
    integrate_limit,
    make_limit_operator,
    mass_pair,
)
from .particles import (
    Ensemble,
    SimConfig,
    bin_counts,
    bin_probabilities,
    empirical_density,
    martingale_residuals,
    reflect,
    simulate_coupled,
    simulate_limit,
    zscores,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
