"""Analysis matrices, frame and Riesz bounds of Gabor systems.

All computations live in the finite model of :mod:`gdl.tfcore`.  Phase-space
points are reduced modulo the period ``P``; this is exact because every
time-frequency shift is ``P``-periodic in both coordinates.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .pointset import Box, PointSet
from .tfcore import SignalGrid, Window, _atoms

__all__ = [
    "AnalysisMatrix",
    "FrameReport",
    "MAX_DENSE_L",
    "analysis_matrix",
    "frame_bounds",
    "riesz_bounds",
    "frame_operator",
    "synthesis",
    "twisted_shift",
    "p_lower_bound",
    "tf_lattice",
    "fit_to_period",
]

# dense eigensolves only; larger models are refused
MAX_DENSE_L = 1024


@dataclass(frozen=True)
class AnalysisMatrix:
    points: np.ndarray  # (n, 2), reduced into [-P/2, P/2)
    matrix: np.ndarray  # (n, L), row lambda = h * conj(pi(lambda) g)
    grid: SignalGrid

    def __matmul__(self, f):
        samples = getattr(f, "samples", f)
        return self.matrix @ samples


@dataclass
class FrameReport:
    A: float
    B: float
    cond: float
    n_points: int
    L: int
    wall_ms: float = 0.0

    def record(self) -> dict:
        return asdict(self)


def _check(g: Window, S: PointSet, grid: SignalGrid | None) -> SignalGrid:
    grid = grid or g.grid
    if grid.L != g.grid.L:
        raise ValueError("window and grid differ")
    if grid.L > MAX_DENSE_L:
        raise ValueError(f"L={grid.L} exceeds the dense eigensolve cutoff {MAX_DENSE_L}")
    if len(S) == 0:
        raise ValueError("point set is empty")
    if S.dim != 2:
        raise ValueError("Gabor systems need phase-space points (m = 2)")
    return grid


def analysis_matrix(g: Window, S: PointSet, grid: SignalGrid | None = None) -> AnalysisMatrix:
    grid = _check(g, S, grid)
    pts = grid.reduce(S.points)
    rows = _atoms(g, pts).conj() * grid.h
    return AnalysisMatrix(pts, rows, grid)


def frame_operator(C: AnalysisMatrix) -> np.ndarray:
    """``C* C`` as an ``L x L`` matrix acting on samples (h-weighted adjoint)."""
    S = C.matrix.conj().T @ C.matrix / C.grid.h
    return (S + S.conj().T) / 2


def synthesis(g: Window, S: PointSet, c) -> np.ndarray:
    """Samples of ``sum_lambda c_lambda pi(lambda) g`` (no reduction of S)."""
    return np.asarray(c, dtype=complex) @ _atoms(g, np.asarray(S.points, dtype=float))


def _report(eigs: np.ndarray, n: int, L: int, t0: float) -> FrameReport:
    B = float(eigs[-1])
    # eigenvalues below the rank tolerance are numerically zero
    tol = max(n, L) * np.finfo(float).eps * max(B, 1.0) * 10
    A = float(eigs[0]) if eigs[0] > tol else 0.0
    cond = B / A if A > 0 else math.inf
    return FrameReport(A, B, cond, n, L, (time.perf_counter() - t0) * 1e3)


def frame_bounds(g: Window, S: PointSet, grid: SignalGrid | None = None) -> FrameReport:
    """Optimal frame bounds: extreme eigenvalues of the frame operator."""
    t0 = time.perf_counter()
    C = analysis_matrix(g, S, grid)
    eigs = np.linalg.eigvalsh(frame_operator(C))
    return _report(eigs, len(S), C.grid.L, t0)


def riesz_bounds(g: Window, S: PointSet, grid: SignalGrid | None = None) -> FrameReport:
    """Optimal Riesz bounds: extreme eigenvalues of the Gram matrix."""
    t0 = time.perf_counter()
    grid = _check(g, S, grid)
    if len(S) > grid.L:
        raise ValueError(f"{len(S)} atoms cannot be a Riesz sequence in dimension {grid.L}")
    C = analysis_matrix(g, S, grid)
    gram = C.matrix @ C.matrix.conj().T / grid.h
    eigs = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
    return _report(eigs, len(S), grid.L, t0)


def twisted_shift(c, S: PointSet, z) -> tuple[np.ndarray, PointSet]:
    """``(kappa(z) c)_{lambda + z} = exp(-2 pi i x lambda_2) c_lambda``."""
    x, xi = (z.x, z.xi) if hasattr(z, "xi") else (float(z[0]), float(z[1]))
    c = np.asarray(c, dtype=complex)
    out = np.exp(-2j * np.pi * x * S.points[:, 1]) * c
    return out, S.translate([x, xi])


def fit_to_period(a: float, P: float) -> float:
    """Closest step to ``a`` that divides the period ``P``."""
    return P / max(1, round(P / a))


def tf_lattice(grid: SignalGrid, a: float, b: float, commensurate: bool = True) -> PointSet:
    """Separable lattice ``a Z x b Z`` inside one period ``[-P/2, P/2)^2``.

    With ``commensurate`` the steps are adjusted to divide ``P`` so that the
    lattice is a subgroup of the phase-space torus.
    """
    P = grid.P
    if commensurate:
        a, b = fit_to_period(a, P), fit_to_period(b, P)
    xs = a * np.arange(math.ceil(-P / 2 / a - 1e-9), math.ceil(P / 2 / a - 1e-9))
    ys = b * np.arange(math.ceil(-P / 2 / b - 1e-9), math.ceil(P / 2 / b - 1e-9))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    return PointSet(pts, 2, Box.cube(-P / 2, P / 2, 2))


def _descend(M: np.ndarray, c: np.ndarray, p, passes: int) -> float:
    n = M.shape[1]
    Mc = M @ c
    best = _pnorm(Mc, p) / _pnorm(c, p)
    steps = np.concatenate([-np.geomspace(1e-4, 4.0, 24), [0.0], np.geomspace(1e-4, 4.0, 24)])
    for _ in range(passes):
        improved = False
        scale = np.abs(c).max()
        for i in range(n):
            for direction in (1.0, 1j):
                col = M[:, i] * direction
                others = np.delete(np.abs(c), i)
                rest = others.sum() if p == 1 else (others.max() if len(others) else 0.0)
                # the extra step cancels the current real (or imaginary) part
                cand = np.concatenate([steps * scale, [-(c[i] * np.conj(direction)).real]])
                r = _ratio_batch_dir(Mc, col, c[i], direction, rest, cand, p)
                k = int(np.argmin(r))
                t = cand[k]
                # one zoom round around the best step
                lo = cand[max(k - 1, 0)]
                hi = cand[min(k + 1, len(cand) - 1)]
                fine = np.linspace(min(lo, hi), max(lo, hi), 33)
                rf = _ratio_batch_dir(Mc, col, c[i], direction, rest, fine, p)
                kf = int(np.argmin(rf))
                if rf[kf] < r[k]:
                    t, rk = fine[kf], rf[kf]
                else:
                    rk = r[k]
                if rk < best * (1 - 1e-12):
                    c[i] += t * direction
                    Mc = Mc + t * col
                    best = rk
                    improved = True
        nrm = _pnorm(c, p)
        c /= nrm
        Mc /= nrm
        best = _pnorm(Mc, p) / _pnorm(c, p)
        if not improved:
            break
    return float(best)


def _ratio_batch_dir(Mc, col, ci, direction, rest, t, p):
    Y = Mc[None, :] + t[:, None] * col[None, :]
    newc = np.abs(ci + t * direction)
    if p == 1:
        num = np.abs(Y).sum(axis=1)
        den = rest + newc
    else:
        num = np.abs(Y).max(axis=1)
        den = np.maximum(rest, newc)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.inf)


def _pnorm(v: np.ndarray, p) -> float:
    a = np.abs(v)
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.sum(a * a)))
    return float(a.max())


def _norm_p(p):
    if p in (1, 2):
        return p
    if p == math.inf or p == "inf":
        return math.inf
    raise ValueError(f"unsupported p={p!r}; use 1, 2 or inf")


def p_lower_bound(M, p, budget: int = 8, seed: int = 0, passes: int = 12) -> float:
    """Estimate ``inf_c ||M c||_p / ||c||_p``.

    ``p = 2`` is exact: the smallest eigenvalue of ``M^H M`` (zero when ``M``
    has more columns than rows).  For ``p`` in {1, inf} the problem is
    non-convex; the value returned is the best ratio found by coordinate
    descent from the unit vectors and ``budget`` seeded random starts.  It is
    an upper estimate of the true infimum.
    """
    M = np.atleast_2d(np.asarray(M))
    p = _norm_p(p)
    rows, cols = M.shape
    if not np.any(M):
        return 0.0
    if p == 2:
        if cols > rows:
            return 0.0
        lam = np.linalg.eigvalsh(M.conj().T @ M)[0]
        return float(math.sqrt(max(lam, 0.0)))
    M = M.astype(complex)
    col_norms = np.array([_pnorm(M[:, i], p) for i in range(cols)])
    best = float(col_norms.min())
    if best == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    starts = [np.eye(cols, dtype=complex)[int(np.argmin(col_norms))]]
    for _ in range(budget):
        starts.append(rng.standard_normal(cols) + 1j * rng.standard_normal(cols))
    for c0 in starts:
        best = min(best, _descend(M, c0.copy(), p, passes))
    return best
