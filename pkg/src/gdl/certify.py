"""Sufficient frame condition from the M^1 modulus of continuity.

If every point of phase space lies within ``delta`` of the set and the window
moves by less than 1 in M^1 under shifts of size ``delta``, the Gabor system
is a frame.  The shift difference ``pi(z) g - pi(w) g`` equals, up to the
isometry ``pi(w)``, ``exp(i theta) pi(u) g - g`` with ``u = z - w`` and
``theta = 2 pi (xi_z - xi_w) x_w``.  The frame argument only pairs this
difference against a function vanishing on ``pi(w) g``, so the phase may be
chosen freely; the modulus used for certification is therefore

    omega_delta = sup_{|u| <= delta} min_theta || exp(i theta) pi(u) g - g ||_{M^1}.

The literal sup over ``theta`` is available as ``phase="sup"``; it does not
tend to zero with ``delta`` and so never certifies anything.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .pointset import Box, PointSet, hole
from .tfcore import PhasePoint, Window, stft_full, tf_shift

__all__ = [
    "Certificate",
    "m1_modulus",
    "m1_distance",
    "shift_profile",
    "critical_delta",
    "certify_frame",
]


@dataclass
class Certificate:
    delta: float
    omega_delta: float
    hole_rho: float
    verdict: str
    margin: float
    u_steps: int
    radial_steps: int
    phase_steps: int
    L: int

    def record(self) -> dict:
        return asdict(self)


def m1_distance(g: Window, a: PhasePoint, b: PhasePoint, window: Window | None = None) -> float:
    """``|| pi(a) g - pi(b) g ||_{M^1}`` computed directly on the full grid."""
    w = window or g
    diff = tf_shift(g.signal, a) - tf_shift(g.signal, b)
    F = stft_full(diff, w)
    return float(F.cell_area * np.abs(F.values).sum())


def _phase_values(Vu: np.ndarray, V0: np.ndarray, thetas: np.ndarray, cell: float) -> np.ndarray:
    ph = np.exp(1j * thetas)[:, None]
    return cell * np.abs(ph * Vu[None] - V0[None]).sum(axis=1)


def shift_profile(g: Window, u: PhasePoint, phase_steps: int = 32, phase: str = "min") -> float:
    """``min`` (or ``sup``) over theta of ``|| exp(i theta) pi(u) g - g ||_{M^1}``."""
    V0 = stft_full(g.signal, g).values
    Vu = stft_full(tf_shift(g.signal, u), g).values
    cell = g.grid.cell_area
    # entries below this level change the sum by less than L^2 * 1e-18
    keep = (np.abs(Vu) + np.abs(V0)) > 1e-18 * np.abs(V0).max()
    Vu, V0 = Vu[keep], V0[keep]
    thetas = 2 * np.pi * np.arange(phase_steps) / phase_steps
    vals = _phase_values(Vu, V0, thetas, cell)
    if phase == "sup":
        return float(vals.max())
    if phase != "min":
        raise ValueError("phase must be 'min' or 'sup'")
    k = int(np.argmin(vals))
    step = 2 * np.pi / phase_steps
    res = minimize_scalar(
        lambda th: float(_phase_values(Vu, V0, np.array([th]), cell)[0]),
        bounds=(thetas[k] - step, thetas[k] + step),
        method="bounded",
        options={"xatol": 1e-7},
    )
    return float(min(vals[k], res.fun))


def m1_modulus(g: Window, delta: float, u_steps: int = 64, phase_steps: int = 32,
               radial_steps: int = 4, phase: str = "min") -> float:
    """Grid estimate of the M^1 modulus of continuity of ``g`` at ``delta``.

    ``u`` runs over ``radial_steps`` rings of radii ``delta*i/radial_steps``
    with ``u_steps`` angles each.  The grid maximum is a lower estimate of
    the true sup over ``|u| <= delta``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta > g.grid.P:
        raise ValueError("delta exceeds one period of the finite model")
    if delta == 0:
        return 0.0
    best = 0.0
    angles = 2 * np.pi * np.arange(u_steps) / u_steps
    for i in range(1, radial_steps + 1):
        r = delta * i / radial_steps
        for a in angles:
            u = PhasePoint(r * math.cos(a), r * math.sin(a))
            best = max(best, shift_profile(g, u, phase_steps, phase))
    return best


def critical_delta(g: Window, level: float = 1.0, tol: float = 1e-3, hi: float = 2.0, **knobs) -> float:
    """Bisection for the largest ``delta`` with ``omega_delta < level``."""
    lo = 0.0
    while m1_modulus(g, hi, **knobs) < level:
        lo, hi = hi, 2 * hi
        if hi > g.grid.P:
            return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if m1_modulus(g, mid, **knobs) < level:
            lo = mid
        else:
            hi = mid
    return lo


def certify_frame(g: Window, S: PointSet, domain: Box | None = None, margin: float = 0.05,
                  tol: float = 1e-3, u_steps: int = 64, phase_steps: int = 32,
                  radial_steps: int = 4) -> Certificate:
    """Certify ``G(g, S)`` as a frame when ``hole(S) <= delta`` and ``omega_delta < 1 - margin``.

    ``domain`` defaults to one period of the finite model.  An inconclusive
    verdict is never a proof that the system fails to be a frame.
    """
    if len(S) == 0:
        raise ValueError("point set is empty")
    grid = g.grid
    if domain is None:
        domain = Box.cube(-grid.P / 2, grid.P / 2, 2)
    knobs = dict(u_steps=u_steps, phase_steps=phase_steps, radial_steps=radial_steps)
    delta = critical_delta(g, level=1.0 - margin, tol=tol, **knobs)
    omega = m1_modulus(g, delta, **knobs)
    rho = _periodic_hole(S, domain, grid.P)
    ok = omega < 1.0 - margin and rho <= delta and delta > 0
    return Certificate(
        delta=delta,
        omega_delta=omega,
        hole_rho=rho,
        verdict="certified-frame" if ok else "inconclusive",
        margin=margin,
        u_steps=u_steps,
        radial_steps=radial_steps,
        phase_steps=phase_steps,
        L=grid.L,
    )


def _periodic_hole(S: PointSet, domain: Box, P: float) -> float:
    """Hole over ``domain`` with the set's periodic images included."""
    pts = np.mod(S.points + P / 2, P) - P / 2
    shifts = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float) * P
    tiled = np.unique(np.vstack([pts + s for s in shifts]), axis=0)
    return hole(PointSet(tiled, 2), domain)
