"""Figures from mixlab CSV artifacts; strictly read-only over its inputs."""

from .plots import (
    RENDERERS,
    render_convergence,
    render_density,
    render_overlay,
    render_strips_compare,
)
from .tables import SchemaError, classify, read_table

__version__ = "0.1.0"

__all__ = [
    "RENDERERS",
    "SchemaError",
    "classify",
    "read_table",
    "render_convergence",
    "render_density",
    "render_overlay",
    "render_strips_compare",
]
