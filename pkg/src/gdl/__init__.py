"""Numerical laboratory for non-uniform Gabor systems in a finite model."""

from .pointset import Ball, Box, PointSet
from .tfcore import PhasePoint, Signal, SignalGrid, Window, gaussian_window, make_grid

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "Box",
    "PointSet",
    "PhasePoint",
    "Signal",
    "SignalGrid",
    "Window",
    "gaussian_window",
    "make_grid",
]
