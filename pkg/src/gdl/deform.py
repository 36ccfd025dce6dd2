"""Deformations of point sets and their Lipschitz diagnostics.

A deformation is a map ``tau`` applied pointwise to a set.  The checks here
measure local preservation of differences (condition L1), inverse control of
differences (condition L2), and Hölder-type bounds for differentiable maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .pointset import PointSet, read_points, read_rows

__all__ = [
    "CollisionError",
    "DeformationMap",
    "JitterMap",
    "LinearMap",
    "DifferentiableMap",
    "AnnuliMap",
    "LipschitzReport",
    "MorreyReport",
    "apply_deformation",
    "check_L1",
    "check_L2",
    "lipschitz_report",
    "morrey_report",
    "annuli_deformation",
    "annulus_index",
    "dilation_family",
    "jitter_map",
    "jitter_from_files",
]


class CollisionError(ValueError):
    """The deformation maps two points of the set to the same image."""


@dataclass(frozen=True)
class DeformationMap:
    n: int = 1

    kind = "abstract"

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class JitterMap(DeformationMap):
    """Per-point offsets ``lambda -> lambda + v_lambda``.

    ``base`` lists the points the table covers; ``offsets`` is aligned with it.
    """

    base: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    offsets: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    kind = "jitter"

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        off = np.asarray(self.offsets, dtype=float).reshape(base.shape)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "offsets", off)

    @property
    def size(self) -> float:
        return float(np.linalg.norm(self.offsets, axis=1).max()) if len(self.offsets) else 0.0

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if len(pts) == 0:
            return pts.copy()
        d, idx = cKDTree(self.base).query(pts)
        if np.any(d > 1e-9):
            raise ValueError("jitter table does not cover every point of the set")
        return pts + self.offsets[idx]


@dataclass(frozen=True)
class LinearMap(DeformationMap):
    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))

    kind = "linear"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if A.shape[0] != A.shape[1] or abs(np.linalg.det(A)) < 1e-14:
            raise ValueError("linear deformation needs an invertible square matrix")
        object.__setattr__(self, "matrix", A)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.matrix.T


@dataclass(frozen=True)
class DifferentiableMap(DeformationMap):
    """A point map ``T`` with user-supplied Jacobian ``DT``.

    Both callables take an ``(k, m)`` array; ``DT`` returns ``(k, m, m)``.
    """

    T: Callable[[np.ndarray], np.ndarray] | None = None
    DT: Callable[[np.ndarray], np.ndarray] | None = None

    kind = "differentiable"

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.T(np.asarray(pts, dtype=float)), dtype=float)


@dataclass(frozen=True)
class AnnuliMap(DeformationMap):
    """Radial map multiplying odd-annulus points by ``1 + 1/n``."""

    kind = "annuli"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("annuli deformation needs n >= 1")

    @property
    def q(self) -> float:
        return 1.0 + 1.0 / self.n

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=1)
        odd = annulus_index(r, self.n) % 2 == 1
        return np.where(odd[:, None], self.q * pts, pts)


def annulus_index(r, n: int) -> np.ndarray:
    """Index ``l`` of the annulus ``q**l <= r < q**(l+1)`` (``l = 0`` below ``q``)."""
    q = 1.0 + 1.0 / n
    r = np.atleast_1d(np.asarray(r, dtype=float))
    l = np.zeros(r.shape, dtype=int)
    big = r >= q
    l[big] = np.floor(np.log(r[big]) / math.log(q)).astype(int)
    # log rounding can be off by one right at an annulus boundary
    l[big & (q ** l > r)] -= 1
    l[big & (q ** (l + 1) <= r)] += 1
    return np.maximum(l, 0)


def annuli_deformation(n: int) -> AnnuliMap:
    return AnnuliMap(n=n)


def jitter_map(S: PointSet, eps: float, seed: int, n: int = 1) -> JitterMap:
    """Offsets of length ``<= eps`` drawn uniformly from the ball; fixed by ``seed``.

    The unscaled directions depend only on the seed, so sweeping ``eps``
    moves every point along the same ray.
    """
    rng = np.random.default_rng(seed)
    m = S.dim
    u = rng.standard_normal((len(S), m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = rng.uniform(size=len(S)) ** (1.0 / m)
    return JitterMap(n=n, base=S.points.copy(), offsets=eps * rad[:, None] * u)


def jitter_from_files(points_path, offsets_path, n: int = 1) -> JitterMap:
    """Jitter table from two point-set files: the base points and one offset per line."""
    base = read_points(points_path)
    dim, off = read_rows(offsets_path)
    if len(base) != len(off) or base.dim != dim:
        raise ValueError("offset file must list one offset per base point")
    return JitterMap(n=n, base=base.points.copy(), offsets=off)


def dilation_family(ns: Sequence[int], dim: int = 2) -> list[LinearMap]:
    return [LinearMap(n=k, matrix=(1.0 + 1.0 / k) * np.eye(dim)) for k in ns]


def apply_deformation(T: DeformationMap, S: PointSet) -> PointSet:
    img = T(S.points)
    if len(img) > 1 and len(np.unique(img, axis=0)) != len(img):
        raise CollisionError(f"{T.kind} map is not injective on the set")
    return PointSet(img, S.dim)


def _pairs(pts: np.ndarray, R: float) -> np.ndarray:
    if len(pts) < 2:
        return np.empty((0, 2), dtype=int)
    return cKDTree(pts).query_pairs(R, output_type="ndarray")


def check_L1(T: DeformationMap, S: PointSet, R: float) -> float:
    """Exact ``sup |(tau l - tau l') - (l - l')|`` over pairs with ``|l - l'| <= R``."""
    if R <= 0:
        raise ValueError("R must be positive")
    pairs = _pairs(S.points, R)
    if len(pairs) == 0:
        return 0.0
    P, img = S.points, T(S.points)
    dev = (img[pairs[:, 0]] - img[pairs[:, 1]]) - (P[pairs[:, 0]] - P[pairs[:, 1]])
    return float(np.linalg.norm(dev, axis=1).max())


def check_L2(family: Sequence[DeformationMap], S: PointSet, R: float, n0: int = 1) -> float | None:
    """Smallest ``R' >= R`` controlling pre-image distances for ``n >= n0``.

    Only the supplied members are inspected, so the value is empirical and
    never certifies the condition for the whole family.  ``None`` means no
    member with ``n >= n0`` was supplied.
    """
    if not family:
        raise ValueError("family must be nonempty")
    worst = None
    for T in family:
        if T.n < n0:
            continue
        img = T(S.points)
        pairs = _pairs(img, R)
        seen = R
        if len(pairs):
            d = np.linalg.norm(S.points[pairs[:, 0]] - S.points[pairs[:, 1]], axis=1)
            seen = max(R, float(d.max()))
        worst = seen if worst is None else max(worst, seen)
    return worst


@dataclass
class LipschitzReport:
    R: float
    L1_sup: float
    L2_Rprime: float | None
    n0: int
    pair_count: int
    certifying: bool = False


def lipschitz_report(family: Sequence[DeformationMap], S: PointSet, R: float, n0: int = 1) -> LipschitzReport:
    members = [T for T in family if T.n >= n0]
    l1 = max((check_L1(T, S, R) for T in members), default=0.0)
    return LipschitzReport(
        R=R,
        L1_sup=l1,
        L2_Rprime=check_L2(family, S, R, n0),
        n0=n0,
        pair_count=len(_pairs(S.points, R)),
    )


@dataclass
class MorreyReport:
    p: float
    alpha: float
    lp_norm_DT_minus_I: float
    epsilon_n: float
    empirical_max_ratio: float
    constant: float = 1.0
    n_pairs: int = 0

    @property
    def bound_holds(self) -> bool:
        return self.empirical_max_ratio <= self.epsilon_n * (1 + 1e-9) + 1e-15


def morrey_report(T: DifferentiableMap, p: float, grid_pts: np.ndarray, cell_volume: float | None = None,
                  max_pairs: int = 200_000, seed: int = 0) -> MorreyReport:
    """Hölder exponent, ``||DT - I||_p`` on the grid, and the empirical ratio.

    ``grid_pts`` is an ``(k, m)`` array of evaluation nodes; ``cell_volume``
    is their Riemann weight (needed for finite ``p``).  The Sobolev constant is
    taken as 1.  The pointwise size of ``DT - I`` is its spectral norm.
    """
    X = np.asarray(grid_pts, dtype=float)
    m = X.shape[1]
    if p <= m:
        raise ValueError(f"p must exceed the dimension {m}")
    alpha = 1.0 - m / p if math.isfinite(p) else 1.0
    J = np.asarray(T.DT(X), dtype=float) - np.eye(m)
    pointwise = np.linalg.norm(J, ord=2, axis=(1, 2))
    if math.isfinite(p):
        if cell_volume is None:
            raise ValueError("finite p needs the grid cell volume")
        lp = float((cell_volume * np.sum(pointwise ** p)) ** (1.0 / p))
    else:
        lp = float(pointwise.max())
    k = len(X)
    total = k * (k - 1) // 2
    if total <= max_pairs:
        i, j = np.triu_indices(k, 1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, k, max_pairs)
        j = rng.integers(0, k, max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    TX = T(X)
    dx = X[i] - X[j]
    dev = np.linalg.norm((TX[i] - TX[j]) - dx, axis=1)
    ratio = dev / np.linalg.norm(dx, axis=1) ** alpha
    return MorreyReport(
        p=p,
        alpha=alpha,
        lp_norm_DT_minus_I=lp,
        epsilon_n=lp,
        empirical_max_ratio=float(ratio.max()) if len(ratio) else 0.0,
        n_pairs=len(ratio),
    )
