"""Geometry of finite point sets in R^m.

Closed balls are used throughout, so every sup/max is attained and the
candidate enumerations below are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import Voronoi, cKDTree
from scipy.special import gamma as gamma_fn

__all__ = [
    "PointSet",
    "Box",
    "Ball",
    "DensityReport",
    "separation",
    "rel_separation",
    "hole",
    "beurling_density",
    "weak_distance",
    "lattice",
    "restrict",
    "read_points",
    "read_rows",
    "write_points",
]

# slack for points that sit on a ball's boundary up to rounding
_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("box corners have different dimensions")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls(np.full(dim, lo, dtype=float), np.full(dim, hi, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def empty(self) -> bool:
        return bool(np.any(self.hi < self.lo))

    def contains(self, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius + tol


@dataclass(frozen=True)
class PointSet:
    """An immutable finite set of distinct points in R^m.

    ``points`` is an ``(n, m)`` array.  ``bbox`` defaults to the tight bounding
    box; a larger box may be passed to record the window the set was cut from.
    """

    points: np.ndarray
    dim: int = 0
    bbox: Box | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        dim = self.dim or (pts.shape[1] if pts.ndim == 2 else 1)
        pts = pts.reshape(-1, dim)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if len(pts) > 1:
            uniq = np.unique(pts, axis=0)
            if len(uniq) != len(pts):
                raise ValueError("point set contains duplicate points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dim", dim)
        if self.bbox is None:
            if len(pts):
                box = Box(pts.min(axis=0), pts.max(axis=0))
            else:
                box = Box(np.zeros(dim), np.zeros(dim))
            object.__setattr__(self, "bbox", box)
        elif not np.all(self.bbox.contains(pts, tol=1e-12)):
            raise ValueError("bbox does not contain all points")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def with_bbox(self, box: Box) -> "PointSet":
        return PointSet(self.points, self.dim, box)

    def union(self, other: "PointSet") -> "PointSet":
        return PointSet(np.vstack([self.points, other.points]), self.dim)

    def translate(self, v) -> "PointSet":
        v = np.asarray(v, dtype=float)
        box = Box(self.bbox.lo + v, self.bbox.hi + v)
        return PointSet(self.points + v, self.dim, box)

    def tree(self) -> cKDTree:
        return cKDTree(self.points)


@dataclass
class DensityReport:
    radii: list[float]
    lower_counts: list[float]
    upper_counts: list[float]
    D_minus_est: float
    D_plus_est: float
    boundary_error: float
    n_centers: int = 0


def separation(S: PointSet) -> float:
    """Minimum pairwise distance; ``inf`` for at most one point."""
    if len(S) <= 1:
        return math.inf
    d, _ = S.tree().query(S.points, k=2)
    return float(d[:, 1].min())


def _sphere_centers(pts: np.ndarray, tuples: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Centers at distance ``radius`` from each point of an m-tuple (m = 2, 3)."""
    P = pts[tuples]  # (k, m, m)
    m = P.shape[-1]
    if m == 2:
        a, b = P[:, 0], P[:, 1]
        half = (b - a) / 2
        h2 = np.einsum("ij,ij->i", half, half)
        ok = h2 <= radius * radius + 1e-12
        mid, half, h2 = (a + half)[ok], half[ok], h2[ok]
        perp = np.stack([-half[:, 1], half[:, 0]], axis=1) / np.sqrt(h2)[:, None]
        off = np.sqrt(np.clip(radius * radius - h2, 0.0, None))[:, None]
        return np.vstack([mid + off * perp, mid - off * perp])
    p0 = P[:, 0, :]
    # the centers lie on the affine hull's orthogonal line through the circumcenter
    D = P[:, 1:, :] - p0[:, None, :]  # (k, m-1, m)
    rhs = 0.5 * np.einsum("kij,kij->ki", D, D)
    out = []
    for Di, ri, a in zip(D, rhs, p0):
        # circumcenter within the affine hull: c = a + D^T y, (D D^T) y = rhs
        gram = Di @ Di.T
        try:
            y = np.linalg.solve(gram, ri)
        except np.linalg.LinAlgError:
            continue
        c = a + Di.T @ y
        r2 = float(np.dot(c - a, c - a))
        if r2 > radius * radius + 1e-12:
            continue
        # unit normal to the hull (one direction suffices up to sign)
        _, _, vt = np.linalg.svd(Di)
        nvec = vt[-1]
        off = math.sqrt(max(radius * radius - r2, 0.0))
        out.append(c + off * nvec)
        out.append(c - off * nvec)
    return np.array(out).reshape(-1, m)


def rel_separation(S: PointSet) -> int:
    """Max number of points in a closed unit ball (exact for m <= 3).

    A maximizing ball can be slid until ``min(m, count)`` points lie on its
    boundary, so it suffices to test the points themselves and the unit
    spheres through m-tuples of points that are pairwise within 2.
    """
    n, m = len(S), S.dim
    if n == 0:
        return 0
    if m > 3:
        raise ValueError("exact relative separation is implemented for m <= 3")
    tree = S.tree()
    pts = S.points
    candidates = [pts]
    if m == 1:
        candidates.append(pts + 1.0)
        candidates.append(pts - 1.0)
    elif n >= m:
        pairs = tree.query_pairs(2.0 + _BOUNDARY_TOL, output_type="ndarray")
        if len(pairs):
            candidates.append((pts[pairs[:, 0]] + pts[pairs[:, 1]]) / 2)
        if m == 2 and len(pairs):
            candidates.append(_sphere_centers(pts, pairs))
        elif m == 3 and len(pairs):
            nbrs = [set() for _ in range(n)]
            for i, j in pairs:
                nbrs[i].add(j)
                nbrs[j].add(i)
            triples = [(i, j, k) for i, j in pairs for k in nbrs[i] & nbrs[j] if k > j > i]
            if triples:
                candidates.append(_sphere_centers(pts, np.array(triples)))
    C = np.vstack(candidates)
    counts = tree.query_ball_point(C, 1.0 + _BOUNDARY_TOL, return_length=True)
    return int(np.max(counts))


def _hole_candidates(pts: np.ndarray, domain: Box) -> np.ndarray:
    m = domain.dim
    cands = [domain.corners()]
    if m == 1:
        xs = np.sort(pts[:, 0])
        cands.append(((xs[1:] + xs[:-1]) / 2).reshape(-1, 1))
        return np.vstack(cands)
    if m != 2:
        raise ValueError("exact hole is implemented for m <= 2; use hole_grid")
    if len(pts) >= 3 and np.linalg.matrix_rank(pts - pts[0]) == 2:
        vor = Voronoi(pts)
        cands.append(vor.vertices)
        ridge_pairs = vor.ridge_points
    else:
        ridge_pairs = np.array(list(itertools.combinations(range(len(pts)), 2))).reshape(-1, 2)
    cands.append(_bisector_edge_hits(pts, ridge_pairs, domain))
    return np.vstack(cands)


def _bisector_edge_hits(pts: np.ndarray, pairs: np.ndarray, domain: Box) -> np.ndarray:
    """Points where perpendicular bisectors of ``pairs`` cross the box edges."""
    if len(pairs) == 0:
        return np.empty((0, 2))
    a, b = pts[pairs[:, 0]], pts[pairs[:, 1]]
    nrm = b - a
    mid = (a + b) / 2
    c = np.einsum("ij,ij->i", nrm, mid)  # bisector: nrm . x = c
    out = []
    for axis in (0, 1):
        other = 1 - axis
        for val in (domain.lo[axis], domain.hi[axis]):
            coef = nrm[:, other]
            ok = np.abs(coef) > 1e-15
            t = (c[ok] - nrm[ok, axis] * val) / coef[ok]
            p = np.empty((ok.sum(), 2))
            p[:, axis] = val
            p[:, other] = t
            out.append(p)
    hits = np.vstack(out)
    return hits[domain.contains(hits, tol=1e-12)]


def hole(S: PointSet, domain: Box) -> float:
    """``sup_{x in domain} dist(x, S)`` evaluated at exact Voronoi candidates.

    Exact for m <= 2 (Voronoi vertices in the domain, bisector/edge crossings
    and corners).  Higher dimensions go through :func:`hole_grid`.
    """
    if len(S) == 0:
        raise ValueError("hole of an empty set is infinite")
    if domain.empty:
        raise ValueError("domain is empty")
    if domain.dim != S.dim:
        raise ValueError("domain and point set dimensions differ")
    if S.dim > 2:
        return hole_grid(S, domain)
    cands = _hole_candidates(S.points, domain)
    cands = cands[domain.contains(cands, tol=1e-12)]
    cands = np.clip(cands, domain.lo, domain.hi)
    d, _ = S.tree().query(cands)
    return float(d.max())


def hole_grid(S: PointSet, domain: Box, per_axis: int = 201) -> float:
    """Fine-grid lower estimate of the hole (fallback for m > 2)."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(domain.lo, domain.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, S.dim)
    d, _ = S.tree().query(grid)
    return float(d.max())


def ball_volume(R: float, m: int) -> float:
    return math.pi ** (m / 2) * R ** m / float(gamma_fn(m / 2 + 1))


def beurling_density(S: PointSet, radii: Sequence[float], centers: int = 15) -> DensityReport:
    """Normalized min/max counts over balls that fit inside ``S.bbox``.

    ``centers`` is the number of sample centers per axis; they form a regular
    grid over the region of admissible centers.  The estimates come from the
    largest radius, and ``boundary_error = m / R`` records the expected
    O(1/R) boundary effect of lattice-like sets.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or radii != sorted(radii):
        raise ValueError("radii must be positive and increasing")
    m = S.dim
    box = S.bbox
    lo_c, hi_c = box.lo + radii[-1], box.hi - radii[-1]
    if np.any(hi_c < lo_c):
        raise ValueError(f"radius {radii[-1]} too large for the bounding box")
    if len(S) == 0:
        zeros = [0.0] * len(radii)
        return DensityReport(radii, zeros, list(zeros), 0.0, 0.0, m / radii[-1])
    tree = S.tree()
    lower, upper = [], []
    n_used = 0
    for R in radii:
        lo, hi = box.lo + R, box.hi - R
        axes = [np.linspace(a, b, centers) for a, b in zip(lo, hi)]
        C = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        counts = tree.query_ball_point(C, R, return_length=True) / ball_volume(R, m)
        lower.append(float(counts.min()))
        upper.append(float(counts.max()))
        n_used = len(C)
    return DensityReport(radii, lower, upper, lower[-1], upper[-1], m / radii[-1], n_used)


def _dist_to_sphere(pts: np.ndarray, z: np.ndarray, R: float) -> np.ndarray:
    return np.abs(R - np.linalg.norm(pts - z, axis=1))


def _one_sided(X: np.ndarray, Y: np.ndarray, z: np.ndarray, R: float) -> float:
    if len(X) == 0:
        return 0.0
    d = _dist_to_sphere(X, z, R)
    if len(Y):
        dy, _ = cKDTree(Y).query(X)
        d = np.minimum(d, dy)
    return float(d.max())


def weak_distance(A: PointSet, B: PointSet, z, R: float) -> float:
    """Hausdorff distance of ``(A ∩ B̄_R(z)) ∪ ∂B_R(z)`` and the same for B."""
    if R <= 0:
        raise ValueError("radius must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    ball = Ball(z, R)
    X = A.points[ball.contains(A.points)]
    Y = B.points[ball.contains(B.points)]
    return max(_one_sided(X, Y, z, R), _one_sided(Y, X, z, R))


def lattice(gen, box: Box) -> PointSet:
    """All points ``gen @ k`` (k integer) lying in ``box``."""
    gen = np.atleast_2d(np.asarray(gen, dtype=float))
    m = gen.shape[0]
    if gen.shape != (m, m) or box.dim != m:
        raise ValueError("generator must be m x m and match the box dimension")
    if abs(np.linalg.det(gen)) < 1e-14:
        raise ValueError("lattice generator is singular")
    inv = np.linalg.inv(gen)
    kc = box.corners() @ inv.T
    kmin = np.floor(kc.min(axis=0)).astype(int) - 1
    kmax = np.ceil(kc.max(axis=0)).astype(int) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
    K = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    pts = K @ gen.T
    # snap rounding noise so that points on the box boundary are kept
    pts = np.where(np.abs(pts - np.round(pts, 12)) < 1e-12, np.round(pts, 12), pts)
    keep = box.contains(pts, tol=1e-12)
    return PointSet(pts[keep], m, _cover(box, pts[keep]))


def _cover(box: Box, pts: np.ndarray) -> Box:
    if len(pts) == 0:
        return box
    return Box(np.minimum(box.lo, pts.min(axis=0)), np.maximum(box.hi, pts.max(axis=0)))


def restrict(S: PointSet, region: Box | Ball) -> PointSet:
    if isinstance(region, Box) and region.empty:
        return PointSet(np.empty((0, S.dim)), S.dim)
    keep = region.contains(S.points, tol=1e-12) if len(S) else np.zeros(0, bool)
    pts = S.points[keep]
    if isinstance(region, Box):
        return PointSet(pts, S.dim, _cover(region, pts))
    return PointSet(pts, S.dim)


def write_points(S: PointSet, path) -> None:
    lines = [f"# dim={S.dim}"]
    lines += [" ".join(repr(float(c)) for c in p) for p in S.points]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_points(path) -> PointSet:
    dim, rows = read_rows(path)
    return PointSet(rows, dim)


def read_rows(path) -> tuple[int, np.ndarray]:
    """Rows of a point-set file without the distinctness check (offset tables)."""
    dim = None
    rows = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("dim="):
                dim = int(line[1:].strip()[4:])
            continue
        rows.append([float(tok) for tok in line.split()])
    if dim is None:
        raise ValueError(f"{path}: missing '# dim=<m>' header")
    if any(len(r) != dim for r in rows):
        raise ValueError(f"{path}: every line must have {dim} coordinates")
    return dim, np.array(rows, dtype=float).reshape(-1, dim)
