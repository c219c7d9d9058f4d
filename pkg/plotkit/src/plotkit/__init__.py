"""Layered figure rendering for invariant-set cross-section exports."""

from .errors import PlotkitError, ReaderError, SpecError
from .figure import build_figure, render
from .reader import read_points, read_polygons
from .spec import FigureSpec, LayerSpec, load_figure_spec

__version__ = "0.1.0"

__all__ = [
    "PlotkitError", "ReaderError", "SpecError",
    "build_figure", "render",
    "read_points", "read_polygons",
    "FigureSpec", "LayerSpec", "load_figure_spec",
]
