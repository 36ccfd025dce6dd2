"""Time-frequency molecules, envelopes, Schur norms and Wilson bases.

An envelope is a nonnegative function on phase space with a finite discrete
amalgam norm.  Molecules are families whose short-time Fourier transforms
are dominated by translates of a common envelope.  The matrix helpers cover
the ingredients of the lower-bound transfer argument: symmetry orbits,
envelope domination, Schur norms, smooth partitions of unity and the
commutator matrices built from them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .frames import p_lower_bound
from .pointset import Box, PointSet
from .tfcore import (
    Signal,
    SignalGrid,
    Window,
    _atoms,
    stft,
    stft_full,
)

__all__ = [
    "Envelope",
    "MoleculeSet",
    "MoleculeCheck",
    "DominationReport",
    "PartitionFamily",
    "TransferReport",
    "WilsonBasis",
    "PreconditionError",
    "g_orbit",
    "sign_patterns",
    "symmetrized_envelope",
    "gaussian_envelope",
    "ambiguity_envelope",
    "field_envelope",
    "cross_envelope",
    "check_molecules",
    "schur_norm",
    "envelope_domination_check",
    "partition_of_unity",
    "partition_lipschitz",
    "commutator_schur_matrix",
    "refined_envelope",
    "refined_tail",
    "verify_lower_bound_transfer",
    "tighten_for_wilson",
    "wilson_basis",
    "wilson_gabor_matrix",
    "wilson_envelope",
    "orbit_bound",
    "bump_psi",
]


class PreconditionError(ValueError):
    """An operation was called outside its stated preconditions."""


def sign_patterns(m: int) -> np.ndarray:
    """All ``2**m`` sign vectors in ``{-1, 1}^m``."""
    return np.array(list(itertools.product((1.0, -1.0), repeat=m)))


def g_orbit(x) -> np.ndarray:
    """Orbit ``{sigma x}`` under coordinate sign flips, duplicates removed."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts = sign_patterns(len(x)) * x[None, :]
    # -0.0 and 0.0 must collapse
    pts = pts + 0.0
    _, idx = np.unique(pts, axis=0, return_index=True)
    return pts[np.sort(idx)]


@dataclass(frozen=True)
class Envelope:
    """Nonnegative function on ``R^m`` with a windowed amalgam norm.

    ``evaluator`` maps a ``(k, m)`` array to ``k`` values.  The amalgam norm
    sums, over integer cells inside ``[-window, window)^m``, the maximum of
    the evaluator on a ``(sub+1)^m`` sub-grid of the closed cell.
    """

    dim: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    window: float = 8.0
    sub: int = 8

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        return np.asarray(self.evaluator(pts), dtype=float)

    def cell_sups(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer cell corners ``t`` and ``sup`` of the envelope on ``t + [0,1]^m``."""
        W = int(math.ceil(self.window))
        ts = np.array(list(itertools.product(range(-W, W), repeat=self.dim)), dtype=float)
        u = np.linspace(0.0, 1.0, self.sub + 1)
        offs = np.array(list(itertools.product(u, repeat=self.dim)))
        sups = np.empty(len(ts))
        for start in range(0, len(ts), 256):
            block = ts[start:start + 256]
            vals = self((block[:, None, :] + offs[None, :, :]).reshape(-1, self.dim))
            sups[start:start + 256] = vals.reshape(len(block), len(offs)).max(axis=1)
        return ts, sups

    @cached_property
    def _amalgam(self) -> tuple[float, float]:
        ts, sups = self.cell_sups()
        W = int(math.ceil(self.window))
        edge = np.any((ts == -W) | (ts == W - 1), axis=1)
        return float(sups.sum()), float(sups[edge].sum())

    @property
    def amalgam_norm(self) -> float:
        return self._amalgam[0]

    @property
    def tail_mass(self) -> float:
        """Contribution of the outermost layer of cells."""
        return self._amalgam[1]

    @property
    def tail_flagged(self) -> bool:
        return self.tail_mass > 1e-8 * max(self.amalgam_norm, 1e-300)

    def scaled(self, c: float) -> "Envelope":
        ev = self.evaluator
        return Envelope(self.dim, lambda p: c * ev(p), self.window, self.sub)


def symmetrized_envelope(theta: Envelope) -> Envelope:
    """``Theta*(x) = sum over the orbit G x of Theta``."""
    m = theta.dim

    def ev(pts):
        pts = np.asarray(pts, dtype=float)
        total = np.zeros(len(pts))
        # orbit points, not sign patterns: coordinates equal to 0 are fixed
        images = np.stack([pts * s + 0.0 for s in sign_patterns(m)])
        for i in range(len(images)):
            dup = np.zeros(len(pts), dtype=bool)
            for j in range(i):
                dup |= np.all(images[i] == images[j], axis=1)
            total += np.where(dup, 0.0, theta(images[i]))
        return total

    return Envelope(m, ev, theta.window, theta.sub)


def gaussian_envelope(height: float = 1.0, width: float = 1.0, dim: int = 2, window: float = 8.0) -> Envelope:
    """``height * exp(-pi |x|^2 / width^2)``."""
    return Envelope(dim, lambda p: height * np.exp(-np.pi * np.sum(p * p, axis=1) / width ** 2), window)


def ambiguity_envelope(g: Window, window: Window | None = None) -> Envelope:
    """``|V_w g|`` evaluated exactly at arbitrary (periodically reduced) points."""
    w = window or g
    grid = g.grid

    def ev(pts):
        return np.abs(stft(g.signal, w, grid.reduce(pts)))

    return Envelope(2, ev, grid.P / 2)


def field_envelope(grid: SignalGrid, values: np.ndarray) -> Envelope:
    """Envelope from nonnegative samples on the phase-space grid.

    ``values[j, k]`` sits at ``(j h, k / P)`` (indices modulo ``L``).  Off-grid
    points use bilinear interpolation, which is exact at the nodes.
    """
    V = np.asarray(values, dtype=float)
    if V.shape != (grid.L, grid.L) or np.any(V < 0):
        raise ValueError("field envelope needs nonnegative L x L samples")
    L, h = grid.L, grid.h

    def ev(pts):
        pts = np.asarray(pts, dtype=float)
        u = pts[:, 0] / h
        v = pts[:, 1] / grid.freq_step
        # snap values within rounding of a node
        u = np.where(np.abs(u - np.rint(u)) < 1e-9, np.rint(u), u)
        v = np.where(np.abs(v - np.rint(v)) < 1e-9, np.rint(v), v)
        j0, k0 = np.floor(u), np.floor(v)
        a, b = u - j0, v - k0
        j0 = j0.astype(int) % L
        k0 = k0.astype(int) % L
        j1, k1 = (j0 + 1) % L, (k0 + 1) % L
        return ((1 - a) * (1 - b) * V[j0, k0] + a * (1 - b) * V[j1, k0]
                + (1 - a) * b * V[j0, k1] + a * b * V[j1, k1])

    return Envelope(2, ev, grid.P / 2)


def cross_envelope(phi: np.ndarray, psi: np.ndarray, grid: SignalGrid) -> np.ndarray:
    """Grid samples of ``Phi^v * Psi``, i.e. ``z -> sum_v Phi(v) Psi(z + v) / L``."""
    F = np.fft.fft2
    out = np.fft.ifft2(np.conj(F(phi)) * F(psi)).real * grid.cell_area
    return np.maximum(out, 0.0)


@dataclass
class MoleculeSet:
    positions: PointSet
    members: list[Signal]
    window: Window
    envelope: Envelope

    def __post_init__(self):
        if len(self.members) != len(self.positions):
            raise ValueError("one member per position is required")
        for f in self.members:
            if f.grid.L != self.window.grid.L:
                raise ValueError("molecules and window must share a grid")


@dataclass
class MoleculeCheck:
    violation: float
    worst_position: np.ndarray | None
    worst_point: np.ndarray | None


def _grid_points(grid: SignalGrid) -> np.ndarray:
    T, X = np.meshgrid(grid.times, grid.freqs, indexing="ij")
    return np.stack([T.ravel(), X.ravel()], axis=1)


def check_molecules(M: MoleculeSet) -> MoleculeCheck:
    """``max (|V_g f_lambda(z)| - Phi(z - lambda))_+`` over members and the full grid."""
    grid = M.window.grid
    Z = _grid_points(grid)
    worst, wl, wz = 0.0, None, None
    for lam, f in zip(M.positions.points, M.members):
        V = np.abs(stft_full(f, M.window).values).ravel()
        bound = M.envelope(grid.reduce(Z - lam))
        excess = V - bound
        i = int(np.argmax(excess))
        if excess[i] > worst:
            worst, wl, wz = float(excess[i]), lam.copy(), Z[i].copy()
    return MoleculeCheck(worst, wl, wz)


def schur_norm(M) -> float:
    """``max(max row abs sum, max column abs sum)``."""
    a = np.abs(np.atleast_2d(np.asarray(M)))
    if a.size == 0:
        return 0.0
    return float(max(a.sum(axis=1).max(), a.sum(axis=0).max()))


@dataclass
class DominationReport:
    holds: bool
    max_excess: float
    constant: float  # smallest c with |A| <= c * bound entrywise


def _points(P) -> np.ndarray:
    return np.asarray(P.points if isinstance(P, PointSet) else P, dtype=float)


def orbit_bound(theta: Envelope, rows, cols, reduce: Callable | None = None) -> np.ndarray:
    """``sum_{sigma in G} Theta(lambda - sigma gamma)`` for all index pairs."""
    R, C = _points(rows).reshape(-1, theta.dim), _points(cols).reshape(-1, theta.dim)
    out = np.zeros((len(R), len(C)))
    for s in sign_patterns(theta.dim):
        D = (R[:, None, :] - (C * s)[None, :, :]).reshape(-1, theta.dim)
        if reduce is not None:
            D = reduce(D)
        out += theta(D).reshape(len(R), len(C))
    return out


def envelope_domination_check(A, rows, cols, theta: Envelope, reduce: Callable | None = None,
                              tol: float = 1e-12) -> DominationReport:
    """Check ``|A_{lambda,gamma}| <= sum_sigma Theta(lambda - sigma gamma)`` entrywise.

    ``reduce`` maps differences into a fundamental domain (periodic models).
    """
    A = np.atleast_2d(np.asarray(A))
    R, C = _points(rows), _points(cols)
    if A.shape != (len(R), len(C)):
        raise ValueError(f"matrix shape {A.shape} does not match index sets ({len(R)}, {len(C)})")
    if A.size == 0:
        return DominationReport(True, 0.0, 0.0)
    bound = orbit_bound(theta, R, C, reduce)
    mag = np.abs(A)
    excess = mag - bound
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, mag / bound, np.where(mag > tol, np.inf, 0.0))
    max_excess = float(max(excess.max(), 0.0))
    return DominationReport(max_excess <= tol, max_excess, float(ratio.max()))


# -- partition of unity -----------------------------------------------------

def _beta(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _psi1(t: np.ndarray) -> np.ndarray:
    """Smooth even bump on ``(-1, 1)`` whose integer translates sum to one."""
    t = np.asarray(t, dtype=float)
    frac = t - np.floor(t)
    den = _beta(frac) + _beta(frac - 1.0)
    return _beta(t) / den


def bump_psi(x: np.ndarray) -> np.ndarray:
    """Tensor-product bump ``psi(x) = prod_i psi1(x_i)``, support ``(-1, 1)^m``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.prod(_psi1(x), axis=1)


@dataclass
class PartitionFamily:
    """Functions ``phi_k(x) = sum_{j in G k} psi(eps x - j)`` for ``k`` in ``indices``.

    ``values[i, n]`` is ``phi_{indices[i]}`` at ``grid[n]``.
    """

    epsilon: float
    indices: np.ndarray
    eta: int
    grid: np.ndarray
    values: np.ndarray
    checks: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.indices.shape[1]

    def __call__(self, pts) -> np.ndarray:
        return _phi(self.epsilon, self.indices, np.atleast_2d(np.asarray(pts, dtype=float)))


def _phi(eps: float, indices: np.ndarray, pts: np.ndarray) -> np.ndarray:
    m = indices.shape[1]
    y = eps * pts
    # psi factorizes, so the orbit sum factorizes over coordinates
    out = np.ones((len(indices), len(pts)))
    for i in range(m):
        k = indices[:, i][:, None]
        yi = y[:, i][None, :]
        term = _psi1(yi - k) + np.where(k != 0, _psi1(yi + k), 0.0)
        out *= term
    return out


def partition_of_unity(epsilon: float, box: Box, resolution: int = 101) -> PartitionFamily:
    """Partition of unity subordinate to the symmetric cover at scale ``1/epsilon``.

    Indices run over ``k in N_0^m`` whose functions can be nonzero on ``box``.
    The invariants are validated on a ``resolution^m`` grid over ``box``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    m = box.dim
    reach = np.maximum(np.abs(box.lo), np.abs(box.hi))
    kmax = np.ceil(epsilon * reach).astype(int) + 1
    indices = np.array(list(itertools.product(*[range(k + 1) for k in kmax])), dtype=int)
    axes = [np.linspace(box.lo[i], box.hi[i], resolution) for i in range(m)]
    grid = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    values = _phi(epsilon, indices, grid)
    total = values.sum(axis=0)
    sq = (values ** 2).sum(axis=0)
    eta = int((values > 0).sum(axis=0).max())
    rng = np.random.default_rng(0)
    xs = rng.uniform(box.lo, box.hi, size=(64, m))
    sym = max(
        float(np.abs(_phi(epsilon, indices, xs * s) - _phi(epsilon, indices, xs)).max())
        for s in sign_patterns(m)
    )
    checks = {
        "sum_error": float(np.abs(total - 1.0).max()),
        "symmetry_error": sym,
        "sq_min": float(sq.min()),
        "sq_max": float(sq.max()),
    }
    if checks["sum_error"] > 1e-12 or sym > 1e-12:
        raise RuntimeError(f"partition invariants failed: {checks}")
    if checks["sq_min"] < 1.0 / eta ** 2 - 1e-12 or checks["sq_max"] > 1.0 + 1e-12:
        raise RuntimeError(f"partition square-sum bounds failed: {checks}")
    return PartitionFamily(float(epsilon), indices, eta, grid, values, checks)


def partition_lipschitz(P: PartitionFamily) -> float:
    """Largest ``|phi(x) - phi(y)| / (eps |x - y|)`` over grid neighbours."""
    m = P.dim
    n = round(len(P.grid) ** (1.0 / m))
    vals = P.values.reshape((len(P.indices),) + (n,) * m)
    pts = P.grid.reshape((n,) * m + (m,))
    best = 0.0
    for ax in range(m):
        dv = np.abs(np.diff(vals, axis=ax + 1))
        dx = np.abs(np.diff(pts[..., ax], axis=ax))
        best = max(best, float((dv / (P.epsilon * dx[None])).max()))
    return best


def commutator_schur_matrix(A, rows, cols, P: PartitionFamily) -> np.ndarray:
    """``V_{j,k}`` = Schur norm of ``-A_{lambda,gamma} phi_j(gamma) (phi_k(lambda) - phi_k(gamma))``."""
    A = np.atleast_2d(np.asarray(A))
    R, C = _points(rows), _points(cols)
    if A.shape != (len(R), len(C)):
        raise ValueError("matrix shape does not match index sets")
    phiR, phiC = P(R), P(C)
    n = len(P.indices)
    V = np.zeros((n, n))
    for j in range(n):
        cj = np.nonzero(phiC[j])[0]
        if len(cj) == 0:
            continue
        B = A[:, cj] * phiC[j, cj][None, :]
        rj = np.nonzero(np.any(B != 0, axis=1))[0]
        B = B[rj]
        for k in range(n):
            fr, fc = phiR[k, rj], phiC[k, cj]
            if not (fr.any() or fc.any()):
                continue
            V[j, k] = schur_norm(B * (fr[:, None] - fc[None, :]))
    return V


def refined_envelope(theta: Envelope, epsilon: float, s: np.ndarray) -> np.ndarray:
    """``sum over t in Z^m with |eps t - s|_inf <= 5`` of the cell sups of ``Theta``."""
    ts, sups = theta.cell_sups()
    s = np.atleast_2d(np.asarray(s, dtype=float))
    near = np.abs(epsilon * ts[None, :, :] - s[:, None, :]).max(axis=2) <= 5
    return near.astype(float) @ sups


def refined_tail(theta: Envelope, epsilon: float) -> float:
    """``sum_{s in Z^m, |s| > 6 sqrt(m)}`` of the refined envelope."""
    m = theta.dim
    ts, sups = theta.cell_sups()
    keep = sups > 0
    ts, sups = ts[keep], sups[keep]
    R = int(math.ceil(epsilon * np.abs(ts).max() + 5)) + 1 if len(ts) else 0
    total = 0.0
    for s in itertools.product(range(-R, R + 1), repeat=m):
        s = np.array(s, dtype=float)
        if np.linalg.norm(s) <= 6 * math.sqrt(m):
            continue
        near = np.abs(epsilon * ts - s).max(axis=1) <= 5
        total += float(sups[near].sum())
    return total


@dataclass
class TransferReport:
    p_known: float
    c_known: float
    estimates: dict
    ratios: dict
    tolerance: float
    domination_constant: float
    status: str
    heuristic: bool = True

    def record(self) -> dict:
        out = {"p_known": self.p_known, "c_known": self.c_known, "tolerance": self.tolerance,
               "domination_constant": self.domination_constant, "status": self.status}
        for q, v in self.estimates.items():
            out[f"lower_q{q}"] = v
            out[f"ratio_q{q}"] = self.ratios[q]
        return out


def verify_lower_bound_transfer(A, rows, cols, theta: Envelope, p_known=2, q_tests=(1, math.inf),
                                tolerance: float = 0.01, budget: int = 8, seed: int = 0,
                                reduce: Callable | None = None) -> TransferReport:
    """Compare heuristic lower bounds on ``l^q`` with a known ``l^p`` lower bound.

    Finite matrices can only corroborate the transfer principle.  The status
    is FAIL when the known bound vanishes or any estimate falls below
    ``tolerance`` times it.
    """
    dom = envelope_domination_check(A, rows, cols, theta, reduce)
    if not dom.holds:
        raise PreconditionError(f"matrix is not dominated by the envelope (excess {dom.max_excess:.3g})")
    c = p_lower_bound(A, p_known, budget=budget, seed=seed)
    est, ratios = {}, {}
    for q in q_tests:
        key = "inf" if q in (math.inf, "inf") else int(q)
        v = p_lower_bound(A, q, budget=budget, seed=seed)
        est[key] = v
        ratios[key] = v / c if c > 0 else 0.0
    ok = c > 0 and all(v >= tolerance * c for v in est.values())
    return TransferReport(p_known, c, est, ratios, tolerance, dom.constant, "PASS" if ok else "FAIL")


# -- Wilson bases -----------------------------------------------------------

def _half_lattice(grid: SignalGrid) -> np.ndarray:
    P = int(round(grid.P))
    xs = np.arange(2 * P) / 2.0 - P / 2
    ys = np.arange(P) - P / 2
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1).astype(float)


def _check_wilson_grid(grid: SignalGrid) -> int:
    P = grid.P
    if abs(P - round(P)) > 1e-12 or round(P) % 2:
        raise ValueError("Wilson bases need sqrt(L) to be an even integer")
    return int(round(P))


def _is_even_real(s: np.ndarray, tol: float = 1e-10) -> bool:
    rev = np.roll(s[::-1], 1)  # s[-j mod L]
    scale = max(np.abs(s).max(), 1e-300)
    return np.abs(s - rev).max() <= tol * scale and np.abs(s.imag).max() <= tol * scale


def tighten_for_wilson(g: Window) -> Window:
    """``sqrt(2) S^{-1/2} g`` for the frame operator ``S`` of ``(1/2 Z) x Z``.

    The result generates a tight frame with bound 2 on the half-integer
    lattice, the normalization under which the Wilson family is orthonormal.
    """
    grid = g.grid
    _check_wilson_grid(grid)
    pts = _half_lattice(grid)
    C = _atoms(g, pts).conj() * grid.h
    S = C.conj().T @ C / grid.h
    S = (S + S.conj().T) / 2
    w, U = np.linalg.eigh(S)
    if w[0] <= 1e-12 * w[-1]:
        raise ValueError("window does not generate a frame on the half-integer lattice")
    root = (U * (1.0 / np.sqrt(w))) @ U.conj().T
    s = math.sqrt(2.0) * (root @ g.samples)
    return Window.from_samples(grid, s.real if np.abs(s.imag).max() < 1e-12 else s)


@dataclass
class WilsonBasis:
    grid: SignalGrid
    labels: np.ndarray  # (L, 2): (gamma_1 in Z/2, gamma_2 in N_0)
    coefficients: list  # per vector: list of (alpha, (x, xi))
    vectors: np.ndarray  # (L, L) samples, row per label

    def signals(self) -> list[Signal]:
        return [Signal(self.grid, v) for v in self.vectors]

    def gram(self) -> np.ndarray:
        return self.grid.h * (self.vectors.conj() @ self.vectors.T)

    @property
    def max_coefficient(self) -> float:
        return max(abs(a) for terms in self.coefficients for a, _ in terms)


def wilson_basis(g_tight: Window, grid: SignalGrid | None = None) -> WilsonBasis:
    """Wilson family from an even, real, tight window on the finite model.

    Labels ``(k/2, l)``: ``l = 0`` uses integer ``k/2`` and the single atom
    ``pi(k/2, 0) g``; ``0 < l < P/2`` uses
    ``(pi(k/2, l) + (-1)^(k+l) pi(k/2, -l)) g / sqrt(2)``; ``l = P/2`` (where
    the two frequencies coincide) keeps ``k = l mod 2`` and one atom.
    """
    grid = grid or g_tight.grid
    P = _check_wilson_grid(grid)
    if not _is_even_real(g_tight.samples):
        raise ValueError("Wilson window must be even and real")
    labels, coefs = [], []
    for k in range(P):
        labels.append((float(k), 0.0))
        coefs.append([(1.0, (float(k), 0.0))])
    for l in range(1, P // 2):
        for k in range(2 * P):
            sgn = (-1.0) ** (k + l)
            labels.append((k / 2, float(l)))
            coefs.append([(1 / math.sqrt(2), (k / 2, float(l))), (sgn / math.sqrt(2), (k / 2, -float(l)))])
    l = P // 2
    for k in range(2 * P):
        if (k - l) % 2 == 0:
            labels.append((k / 2, float(l)))
            coefs.append([(1.0, (k / 2, float(l)))])
    vectors = np.zeros((len(labels), grid.L), dtype=complex)
    for i, terms in enumerate(coefs):
        pts = grid.reduce(np.array([pt for _, pt in terms], dtype=float))
        alphas = np.array([a for a, _ in terms], dtype=complex)
        vectors[i] = alphas @ _atoms(g_tight, pts)
    return WilsonBasis(grid, np.array(labels), coefs, vectors)


def wilson_gabor_matrix(W: WilsonBasis, g: Window, S: PointSet) -> np.ndarray:
    """``A[lambda, gamma] = <g_gamma, pi(lambda) g>``."""
    A = np.empty((len(S), len(W.labels)), dtype=complex)
    for i, v in enumerate(W.vectors):
        A[:, i] = stft(Signal(W.grid, v), g, S.points)
    return A


def wilson_envelope(g_tight: Window, g: Window) -> Envelope:
    """``Theta = Phi^v * |V_g g|`` with ``Phi = |V_g g_tight|``, sampled on the grid."""
    grid = g.grid
    phi = np.abs(stft_full(g_tight.signal, g).values)
    psi = np.abs(stft_full(g.signal, g).values)
    return field_envelope(grid, cross_envelope(phi, psi, grid))
