"""Finite periodic time-frequency model.

Signals live on ``L`` samples of the circle of length ``P = sqrt(L)`` with
step ``h = 1/sqrt(L)``.  The frequency grid has the same step, so time and
frequency are treated symmetrically.  Sample ``j`` sits at the centered
position ``t_j`` in ``[-P/2, P/2)``.

Time shifts are applied as phase ramps in the Fourier domain (cyclic
rotations when grid-aligned) and frequency shifts as multiplication by
``exp(2 pi i xi t_j)``; both are exactly unitary for every real shift.  For grid-aligned shifts the operators reduce to cyclic
rotations and obey the Weyl commutation relations exactly.  For fractional
shifts the relations hold only up to the (tiny) mass a signal carries near
the seam of the period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GridError",
    "SignalGrid",
    "Signal",
    "Window",
    "PhasePoint",
    "TFField",
    "make_grid",
    "gaussian_window",
    "bump_window",
    "tf_shift",
    "tf_shift_samples",
    "local_times",
    "stft",
    "stft_full",
    "mp_norm",
    "field_at",
    "random_signal",
    "gaussian_packet",
]


class GridError(ValueError):
    """Invalid grid or mismatched grids."""


@dataclass(frozen=True)
class SignalGrid:
    L: int

    @property
    def h(self) -> float:
        return 1.0 / math.sqrt(self.L)

    @property
    def P(self) -> float:
        return math.sqrt(self.L)

    @property
    def freq_step(self) -> float:
        return 1.0 / self.P

    @property
    def cell_area(self) -> float:
        return 1.0 / self.L

    @property
    def times(self) -> np.ndarray:
        """Centered sample positions in ``[-P/2, P/2)``."""
        j = np.arange(self.L)
        j = np.where(j < (self.L + 1) // 2, j, j - self.L)
        return j * self.h

    @property
    def freqs(self) -> np.ndarray:
        """Centered frequencies matching ``np.fft`` ordering."""
        return np.fft.fftfreq(self.L, d=self.h)

    def reduce(self, value):
        """Reduce coordinates modulo ``P`` into ``[-P/2, P/2)``."""
        P = self.P
        return np.mod(np.asarray(value, dtype=float) + P / 2, P) - P / 2

    def is_aligned(self, z: "PhasePoint", tol: float = 1e-12) -> bool:
        x, xi = z.x / self.h, z.xi / self.freq_step
        return abs(x - round(x)) < tol and abs(xi - round(xi)) < tol


def make_grid(L: int) -> SignalGrid:
    if int(L) != L or L < 4:
        raise GridError(f"grid needs an integer L >= 4, got {L!r}")
    return SignalGrid(int(L))


@dataclass(frozen=True)
class Signal:
    grid: SignalGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.L,):
            raise GridError(f"expected {self.grid.L} samples, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    def norm(self) -> float:
        return math.sqrt(self.grid.h * float(np.vdot(self.samples, self.samples).real))

    def inner(self, other: "Signal") -> complex:
        """L2 inner product, linear in the first argument."""
        _same_grid(self.grid, other.grid)
        return self.grid.h * complex(np.vdot(other.samples, self.samples))

    def __add__(self, other: "Signal") -> "Signal":
        _same_grid(self.grid, other.grid)
        return Signal(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Signal") -> "Signal":
        _same_grid(self.grid, other.grid)
        return Signal(self.grid, self.samples - other.samples)

    def scale(self, c: complex) -> "Signal":
        return Signal(self.grid, c * self.samples)


@dataclass(frozen=True)
class Window:
    signal: Signal

    def __post_init__(self):
        n = self.signal.norm()
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"window must have unit norm, got {n!r}")

    @property
    def grid(self) -> SignalGrid:
        return self.signal.grid

    @property
    def samples(self) -> np.ndarray:
        return self.signal.samples

    @classmethod
    def from_samples(cls, grid: SignalGrid, samples) -> "Window":
        """Normalize arbitrary nonzero samples to a unit-norm window."""
        s = np.asarray(samples, dtype=complex)
        n = math.sqrt(grid.h * float(np.vdot(s, s).real))
        if n == 0:
            raise ValueError("window samples are identically zero")
        return cls(Signal(grid, s / n))


@dataclass(frozen=True)
class PhasePoint:
    x: float
    xi: float

    def __add__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.x + other.x, self.xi + other.xi)

    def __sub__(self, other: "PhasePoint") -> "PhasePoint":
        return PhasePoint(self.x - other.x, self.xi - other.xi)

    def __neg__(self) -> "PhasePoint":
        return PhasePoint(-self.x, -self.xi)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.xi])


@dataclass(frozen=True)
class TFField:
    """STFT values on the full ``L x L`` phase-space grid.

    ``values[j, k]`` is the value at ``(t_j, nu_k)`` in ``np.fft`` ordering:
    ``j`` indexes time shifts ``j*h`` and ``k`` frequency shifts ``k/P``.
    """

    grid: SignalGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.L, self.grid.L):
            raise GridError(f"field must be {self.grid.L}x{self.grid.L}, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def cell_area(self) -> float:
        return self.grid.cell_area


def _same_grid(a: SignalGrid, b: SignalGrid) -> None:
    if a.L != b.L:
        raise GridError(f"grid mismatch: L={a.L} vs L={b.L}")


def _periodized_samples(grid: SignalGrid, profile, terms: int = 6) -> np.ndarray:
    t = grid.times
    P = grid.P
    return sum(profile(t + m * P) for m in range(-terms, terms + 1))


def gaussian_window(grid: SignalGrid) -> Window:
    """Periodized unit-norm Gaussian ``2**0.25 * exp(-pi t**2)``."""
    s = _periodized_samples(grid, lambda t: 2 ** 0.25 * np.exp(-np.pi * t * t))
    return Window.from_samples(grid, s)


def bump_window(grid: SignalGrid, radius: float = 1.5) -> Window:
    """Periodized compactly supported bump ``(1 - (t/r)**2)**3`` (C^2)."""
    if not 0 < radius <= grid.P / 2:
        raise ValueError("bump radius must lie in (0, P/2]")

    def profile(t):
        u = np.clip(1.0 - (t / radius) ** 2, 0.0, None)
        return u ** 3

    return Window.from_samples(grid, _periodized_samples(grid, profile, terms=1))


def _translate(grid: SignalGrid, samples: np.ndarray, x) -> np.ndarray:
    """Cyclic translation by ``x`` along the last axis (per-row ``x`` allowed)."""
    x = np.asarray(x, dtype=float)
    k = np.rint(x / grid.h)
    if np.all(np.abs(x / grid.h - k) < 1e-12):
        idx = (np.arange(grid.L) - k.astype(int)[..., None]) % grid.L
        return np.take_along_axis(samples, idx, axis=-1) if samples.ndim > 1 else samples[idx]
    ramp = np.exp(-2j * np.pi * x[..., None] * grid.freqs)
    return np.fft.ifft(np.fft.fft(samples, axis=-1) * ramp, axis=-1)


def local_times(grid: SignalGrid, x) -> np.ndarray:
    """Sample positions represented in the period ``[x - P/2, x + P/2)``."""
    x = np.asarray(x, dtype=float)[..., None]
    P = grid.P
    return np.mod(grid.times - x + P / 2, P) - P / 2 + x


def tf_shift_samples(grid: SignalGrid, samples: np.ndarray, x: float, xi: float) -> np.ndarray:
    """Apply ``pi(x, xi)`` to raw samples (last axis).

    The translation is done first; the modulation then uses the sample
    positions nearest to ``x``, so the phase seam of an off-grid frequency
    lies half a period away from the shifted signal.  For grid-aligned ``xi``
    the choice of representative is immaterial.
    """
    out = np.asarray(samples, dtype=complex)
    if x != 0.0:
        out = _translate(grid, out, x)
    if xi != 0.0:
        out = out * np.exp(2j * np.pi * xi * local_times(grid, x))
    return out


def tf_shift(f: Signal, z: PhasePoint) -> Signal:
    """Time-frequency shift ``pi(z) f (t) = exp(2 pi i xi t) f(t - x)``."""
    return Signal(f.grid, tf_shift_samples(f.grid, f.samples, z.x, z.xi))


def _atoms(g: Window, pts: np.ndarray) -> np.ndarray:
    """Rows ``pi(lambda) g`` for an ``(n, 2)`` array of phase points."""
    grid = g.grid
    xs, xis = pts[:, 0], pts[:, 1]
    rows = np.broadcast_to(g.samples, (len(pts), grid.L))
    k = np.rint(xs / grid.h)
    aligned = np.abs(xs / grid.h - k) < 1e-12
    out = np.empty((len(pts), grid.L), dtype=complex)
    for mask in (aligned, ~aligned):
        if mask.any():
            out[mask] = _translate(grid, rows[mask], xs[mask])
    return out * np.exp(2j * np.pi * xis[:, None] * local_times(grid, xs))


def _as_points(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        pts = np.asarray(points, dtype=float)
    else:
        pts = np.array([[p.x, p.xi] if isinstance(p, PhasePoint) else p for p in points], dtype=float)
    return pts.reshape(-1, 2)


def stft(f: Signal, g: Window, points: Iterable[PhasePoint] | np.ndarray) -> np.ndarray:
    """``V_g f(z) = <f, pi(z) g>`` at the requested phase-space points."""
    _same_grid(f.grid, g.grid)
    pts = _as_points(points)
    out = np.empty(len(pts), dtype=complex)
    for start in range(0, len(pts), 512):
        atoms = _atoms(g, pts[start:start + 512])
        out[start:start + 512] = f.grid.h * (atoms.conj() @ f.samples)
    return out


def stft_full(f: Signal, g: Window) -> TFField:
    """STFT on every grid point ``(j h, k/P)``, computed row-wise by FFT."""
    _same_grid(f.grid, g.grid)
    L = f.grid.L
    idx = (np.arange(L)[None, :] - np.arange(L)[:, None]) % L
    prod = f.samples[None, :] * g.samples.conj()[idx]
    return TFField(f.grid, f.grid.h * np.fft.fft(prod, axis=1))


def mp_norm(F: TFField, p) -> float:
    """Discrete modulation-space norm with Riemann cell area ``1/L``."""
    a = np.abs(F.values)
    if p == 1:
        return float(F.cell_area * a.sum())
    if p == 2:
        return float(math.sqrt(F.cell_area * float(np.sum(a * a))))
    if p == math.inf or p == "inf":
        return float(a.max())
    raise ValueError(f"unsupported p={p!r}; use 1, 2 or inf")


def field_at(F: TFField, z: PhasePoint) -> complex:
    """Value of a full-grid field at a grid-aligned phase point."""
    grid = F.grid
    if not grid.is_aligned(z):
        raise GridError(f"{z} is not on the phase-space grid")
    j = int(round(z.x / grid.h)) % grid.L
    k = int(round(z.xi / grid.freq_step)) % grid.L
    return complex(F.values[j, k])


def random_signal(grid: SignalGrid, rng: np.random.Generator) -> Signal:
    s = rng.standard_normal(grid.L) + 1j * rng.standard_normal(grid.L)
    return Signal(grid, s)


def gaussian_packet(grid: SignalGrid, centers: Sequence[PhasePoint], coeffs) -> Signal:
    """Finite combination of shifted Gaussians (a TF-localized test signal)."""
    g = gaussian_window(grid)
    pts = _as_points(centers)
    return Signal(grid, np.asarray(coeffs, dtype=complex) @ _atoms(g, pts))
