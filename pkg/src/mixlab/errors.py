"""Error taxonomy shared across the package.

Every failure the command line surfaces falls into one of five categories:
config, alignment, stability, normalization, io.  Library code raises the
typed exception; the CLI maps it to an exit code and a categorized message.
"""

from __future__ import annotations


class MixLabError(Exception):
    """Base class for all package errors."""

    category = "config"


class ConfigError(MixLabError):
    """Malformed or inconsistent configuration (unknown fields, bad values)."""

    category = "config"


class ResolutionError(MixLabError):
    """Grid resolution outside the supported range."""

    category = "config"


class AlignmentError(MixLabError):
    """Partition geometry does not align with the grid (divisibility)."""

    category = "alignment"


class StabilityError(MixLabError):
    """Time step violates the stability bound, or a run lost monotonicity."""

    category = "stability"


class NormalizationError(MixLabError):
    """Kernel row normalization failed (reducible support, no convergence)."""

    category = "normalization"


class ComparisonError(MixLabError):
    """Two objects that must share a grid or snapshot times do not."""

    category = "config"


class DiagnosticError(MixLabError):
    """A diagnostic was requested on an ensemble lacking the needed logs."""

    category = "config"


class IOError_(MixLabError):
    """Artifact reading or writing failed."""

    category = "io"
