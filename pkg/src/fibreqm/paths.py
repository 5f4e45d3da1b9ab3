"""Base-space variants and parameterized observer paths.

Everything indexed "along the path" elsewhere in the library is keyed by the
parameter t, never by the base point gamma(t), so self-intersecting paths
cause no ambiguity in stored sections or morphisms.  The base geometry is
bookkeeping only; the dynamics never uses it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

__all__ = [
    "BaseSpace",
    "Euclidean",
    "Interval",
    "Path",
    "SinglePoint",
    "make_path",
    "self_intersections",
]


class BaseSpace:
    """Common interface of the base-space variants."""

    def coerce_point(self, raw) -> np.ndarray:
        """Normalize a point to a flat coordinate row (possibly empty)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Euclidean(BaseSpace):
    """Euclidean space of dimension d >= 1.

    Minkowski / pseudo-Riemannian bases are represented by d = 4 together
    with the `forbid_self_intersections` flag of make_path; world lines of
    physical observers cannot self-intersect.
    """

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"Euclidean base needs dim >= 1, got {self.dim}")

    def coerce_point(self, raw) -> np.ndarray:
        p = np.asarray(raw, dtype=float).reshape(-1)
        if p.shape != (self.dim,):
            raise ValueError(f"point has shape {p.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(p)):
            raise ValueError("point has non-finite coordinates")
        return p


@dataclass(frozen=True)
class Interval(BaseSpace):
    """Real interval [lower, upper]; the degenerate choice M = J."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper) and self.lower < self.upper):
            raise ValueError(f"interval needs lower < upper, got [{self.lower}, {self.upper}]")

    def coerce_point(self, raw) -> np.ndarray:
        x = float(np.asarray(raw).reshape(()))
        pad = 1e-12 * max(1.0, abs(self.lower), abs(self.upper))
        if not (self.lower - pad <= x <= self.upper + pad):
            raise ValueError(f"point {x} lies outside [{self.lower}, {self.upper}]")
        return np.array([x])


@dataclass(frozen=True)
class SinglePoint(BaseSpace):
    """One-point base; every path is constant and maximally self-intersecting."""

    def coerce_point(self, raw) -> np.ndarray:
        # The only point has no coordinates; distances are identically zero.
        return np.empty(0, dtype=float)


@dataclass(frozen=True)
class Path:
    """Parameterized curve gamma: [t_start, t_end] -> base with a sample grid."""

    base: BaseSpace
    t_start: float
    t_end: float
    grid: np.ndarray     # strictly increasing sample times
    points: np.ndarray   # (N, k) coordinates, k = 0 for a single-point base
    point_fn: Optional[Callable[[float], object]] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        points = np.asarray(self.points, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 samples")
        if points.shape[0] != grid.shape[0]:
            raise ValueError("one sampled point required per grid time")
        grid.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "points", points)

    def point_at(self, t: float):
        if self.point_fn is None:
            return self.points[int(np.argmin(np.abs(self.grid - t)))]
        return self.base.coerce_point(self.point_fn(float(t)))


def make_path(base: BaseSpace, domain: Tuple[float, float],
              point_fn: Optional[Callable[[float], object]], samples: int,
              forbid_self_intersections: bool = False,
              intersection_tol: float = 1e-9) -> Path:
    """Sample a path over `domain` on a uniform grid and validate it.

    `point_fn` may be omitted for a SinglePoint base.  With
    `forbid_self_intersections` the sampled path must be injective at
    `intersection_tol` resolution (world-line bases).
    """
    t0, t1 = float(domain[0]), float(domain[1])
    if not (np.isfinite(t0) and np.isfinite(t1) and t0 < t1):
        raise ValueError(f"degenerate domain [{t0}, {t1}]")
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")

    grid = np.linspace(t0, t1, samples)
    if isinstance(base, SinglePoint):
        points = np.empty((samples, 0), dtype=float)
        fn = point_fn
    else:
        if point_fn is None:
            raise ValueError("point_fn is required unless the base is a single point")
        rows = []
        for t in grid:
            raw = point_fn(float(t))
            if raw is None:
                raise ValueError(f"path map undefined at grid time {t}")
            rows.append(base.coerce_point(raw))
        points = np.stack(rows)
        fn = point_fn

    path = Path(base, t0, t1, grid, points, fn)
    if forbid_self_intersections and self_intersections(path, intersection_tol):
        raise ValueError("path self-intersects but the base forbids self-intersections")
    return path


def self_intersections(path: Path, spatial_tol: float) -> List[Tuple[float, float]]:
    """Grid-time pairs (t, s), t < s, with distance(gamma(t), gamma(s)) <= spatial_tol.

    Each unordered pair is reported once; the detection predicate itself is
    symmetric in t and s.  On a single-point base every distinct pair
    qualifies.
    """
    if spatial_tol < 0:
        raise ValueError("spatial_tol must be >= 0")
    pts = path.points
    n = pts.shape[0]
    if pts.shape[1] == 0:
        dist_sq = np.zeros((n, n))
    else:
        diff = pts[:, None, :] - pts[None, :, :]
        dist_sq = np.einsum("ijk,ijk->ij", diff, diff)
    close = dist_sq <= spatial_tol * spatial_tol
    ii, jj = np.nonzero(np.triu(close, k=1))
    return [(float(path.grid[i]), float(path.grid[j])) for i, j in zip(ii, jj)]
