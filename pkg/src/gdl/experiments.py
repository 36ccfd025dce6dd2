"""Experiment drivers shared by the command line and the acceptance suite.

Deformations act on the whole plane, while the finite model only sees one
period of phase space.  The drivers therefore deform a lattice generated
over a larger region and keep the image points falling in a half-open
period window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .deform import AnnuliMap, DeformationMap, LinearMap, annulus_index, jitter_map
from .frames import FrameReport, fit_to_period, frame_bounds
from .pointset import Box, PointSet, hole, lattice
from .tfcore import SignalGrid, Window

__all__ = [
    "SUITE_STEP",
    "period_window",
    "plane_lattice",
    "periodic_patch",
    "deformed_patch",
    "dilation_series",
    "jitter_series",
    "AnnuliRow",
    "annuli_counterexample",
]

# oversampled Gaussian suite: a = b ~ 1/sqrt(2)
SUITE_STEP = 1 / math.sqrt(2)


def period_window(pts: np.ndarray, center, P: float) -> np.ndarray:
    """Mask of points in ``center + [-P/2, P/2)^2``."""
    d = pts - np.asarray(center, dtype=float)[None, :]
    return np.all((d >= -P / 2 - 1e-12) & (d < P / 2 - 1e-12), axis=1)


def plane_lattice(step: float, half_width: float) -> PointSet:
    """``step Z^2`` inside ``[-half_width, half_width]^2``."""
    return lattice(step * np.eye(2), Box.cube(-half_width, half_width, 2))


def periodic_patch(pts: np.ndarray, center, grid: SignalGrid) -> PointSet:
    """Points of one period window around ``center``, moved to the origin."""
    P = grid.P
    keep = period_window(pts, center, P)
    sub = pts[keep] - np.asarray(center, dtype=float)[None, :]
    return PointSet(sub, 2, Box.cube(-P / 2, P / 2, 2))


def deformed_patch(T: DeformationMap, grid: SignalGrid, step: float, center=(0.0, 0.0),
                   margin: float = 2.0) -> PointSet:
    """Image under ``T`` of a commensurate lattice, cut to one period window."""
    P = grid.P
    a = fit_to_period(step, P)
    reach = float(np.abs(center).max()) + margin * P
    base = plane_lattice(a, reach)
    return periodic_patch(T(base.points), center, grid)


def dilation_series(g: Window, ns, step: float = SUITE_STEP) -> tuple[FrameReport, list[tuple[int, FrameReport]]]:
    """Frame bounds of ``(1 + 1/n) Lambda`` restricted to one period, and of ``Lambda``."""
    grid = g.grid
    base = frame_bounds(g, deformed_patch(LinearMap(matrix=np.eye(2)), grid, step))
    out = []
    for n in ns:
        T = LinearMap(n=n, matrix=(1 + 1 / n) * np.eye(2))
        out.append((n, frame_bounds(g, deformed_patch(T, grid, step))))
    return base, out


def jitter_series(g: Window, eps_list, seed: int, step: float = SUITE_STEP) -> tuple[FrameReport, list[tuple[float, FrameReport]]]:
    """Frame bounds of seeded jitters of the commensurate lattice on one period."""
    grid = g.grid
    P = grid.P
    a = fit_to_period(step, P)
    base_set = plane_lattice(a, P / 2)
    base_set = periodic_patch(base_set.points, (0.0, 0.0), grid)
    base = frame_bounds(g, base_set)
    out = []
    for eps in eps_list:
        J = jitter_map(base_set, eps, seed)
        out.append((eps, frame_bounds(g, PointSet(J(base_set.points), 2, base_set.bbox))))
    return base, out


@dataclass
class AnnuliRow:
    radius: float
    hole_deformed: float
    hole_lattice: float
    A_deformed: float
    A_lattice: float
    empty_odd_annuli: bool


def annuli_counterexample(g: Window, n: int, radii, step: float = SUITE_STEP) -> list[AnnuliRow]:
    """Holes and local lower frame bounds of the annuli deformation.

    For each radius ``R`` the hole is measured over ``[-R, R]^2``; the frame
    bound is that of the period window centred at the lattice point nearest
    to ``(R, 0)``, with the undeformed lattice window as reference.
    """
    grid = g.grid
    P = grid.P
    a = fit_to_period(step, P)
    T = AnnuliMap(n=n)
    rows = []
    for R in radii:
        reach = math.sqrt(2) * R * T.q + P + 2
        base = plane_lattice(a, reach)
        # images may coincide; the deformed set is the image as a set
        img = np.unique(T(base.points), axis=0)
        dom = Box.cube(-R, R, 2)
        near = np.all(np.abs(img) <= R + 2 * a + 1, axis=1)
        hd = hole(PointSet(img[near], 2), dom)
        near0 = np.all(np.abs(base.points) <= R + 2 * a, axis=1)
        h0 = hole(PointSet(base.points[near0], 2), dom)
        center = (a * round(R / a), 0.0)
        Ad = frame_bounds(g, periodic_patch(img, center, grid)).A
        A0 = frame_bounds(g, periodic_patch(base.points, center, grid)).A
        r = np.linalg.norm(img, axis=1)
        inside = (r >= T.q) & (r <= R)
        rows.append(AnnuliRow(float(R), hd, h0, Ad, A0,
                              not np.any(annulus_index(r[inside], n) % 2 == 1)))
    return rows
