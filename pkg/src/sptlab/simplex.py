"""Simplex geometry and path containers.

Market weights live on the lateral face of the unit simplex (nonnegative,
summing to one).  Everything downstream works on uniform time grids of such
points, possibly frozen after an absorption index.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NegativeWeight, NonpositiveCap, NotOnHyperplane, SumNotOne

SUM_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0, t0+dt, ..., t0+n_steps*dt (times in years)."""

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def n_times(self):
        return self.n_steps + 1

    @property
    def horizon(self):
        return self.n_steps * self.dt

    def times(self):
        return self.t0 + self.dt * np.arange(self.n_times)

    def index_of(self, t, tol=1e-9):
        """Grid index closest to time t; raises if t is off-grid."""
        k = round((t - self.t0) / self.dt)
        if k < 0 or k > self.n_steps or abs(self.t0 + k * self.dt - t) > tol:
            raise ValueError(f"time {t} is not on the grid")
        return int(k)


@dataclass(frozen=True)
class SimplexPoint:
    """A validated point of the unit simplex (weights sum to one)."""

    weights: np.ndarray

    @property
    def d(self):
        return self.weights.shape[0]


def validate_simplex(x) -> SimplexPoint:
    """Validate a raw vector as a simplex point.  No renormalization."""
    w = np.asarray(x, dtype=float)
    if w.ndim != 1 or w.shape[0] < 2:
        raise ValueError("need a 1-d vector with d >= 2")
    neg = np.where(w < 0)[0]
    if neg.size:
        i = int(neg[0])
        raise NegativeWeight(i, float(w[i]))
    total = float(w.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise SumNotOne(total)
    return SimplexPoint(w.copy())


def radial_r(x) -> float:
    """Squared distance from the barycenter, for a 3-vector on the hyperplane.

    Computed as the mean of squared pairwise differences; equal to
    sum((x_i - 1/3)^2) = sum(x_i^2) - 1/3 on the hyperplane.
    """
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError("radial_r is defined for d = 3 only")
    total = float(v.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise NotOnHyperplane(total)
    return ((v[0] - v[1]) ** 2 + (v[0] - v[2]) ** 2 + (v[1] - v[2]) ** 2) / 3.0


def radial_r_sq(x) -> float:
    """Cross-check form of radial_r: sum of squares minus one third."""
    v = np.asarray(x, dtype=float)
    total = float(v.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise NotOnHyperplane(total)
    return float(v @ v) - 1.0 / 3.0


def radial_r_many(points) -> np.ndarray:
    """Vectorized radial_r over an (..., 3) array of hyperplane points."""
    p = np.asarray(points, dtype=float)
    return ((p[..., 0] - p[..., 1]) ** 2
            + (p[..., 0] - p[..., 2]) ** 2
            + (p[..., 1] - p[..., 2]) ** 2) / 3.0


@dataclass(frozen=True)
class WeightPath:
    """Market weights on a uniform grid, frozen from stop_index onward.

    hit_time, when set, refines the absorption time below grid resolution
    (linear interpolation of the crossing coordinate).
    """

    grid: TimeGrid
    points: np.ndarray                 # (n_steps+1, d)
    stop_index: Optional[int] = None
    hit_time: Optional[float] = None

    @property
    def d(self):
        return self.points.shape[1]

    def validate(self, sum_tol=SUM_TOL):
        if self.points.shape[0] != self.grid.n_times:
            raise ValueError("points do not match grid")
        sums = self.points.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > sum_tol)[0]
        if bad.size:
            raise SumNotOne(float(sums[bad[0]]))
        if (self.points < -sum_tol).any():
            k, i = np.argwhere(self.points < -sum_tol)[0]
            raise NegativeWeight(int(i), float(self.points[k, i]))
        if self.stop_index is not None:
            tail = self.points[self.stop_index:]
            if not np.array_equal(tail, np.broadcast_to(tail[0], tail.shape)):
                raise ValueError("path not frozen after stop_index")
        return self

    def min_weight(self):
        return float(self.points.min())


@dataclass(frozen=True)
class CapPath:
    """Strictly positive capitalizations on a uniform grid."""

    grid: TimeGrid
    caps: np.ndarray                   # (n_steps+1, d), currency units

    def validate(self):
        if self.caps.shape[0] != self.grid.n_times:
            raise ValueError("caps do not match grid")
        if (self.caps <= 0).any():
            k, i = np.argwhere(self.caps <= 0)[0]
            raise NonpositiveCap(int(k), int(i))
        return self


def weights_from_caps(c: CapPath) -> WeightPath:
    """Market weights mu_i = S_i / sum_j S_j at every grid time."""
    c.validate()
    totals = c.caps.sum(axis=1, keepdims=True)
    return WeightPath(grid=c.grid, points=c.caps / totals)


def constant_path(grid: TimeGrid, x) -> WeightPath:
    point = validate_simplex(x).weights
    return WeightPath(grid=grid, points=np.tile(point, (grid.n_times, 1)))


def caps_to_csv(c: CapPath, path):
    d = c.caps.shape[1]
    header = "t," + ",".join(f"S{i + 1}" for i in range(d))
    data = np.column_stack([c.grid.times(), c.caps])
    np.savetxt(path, data, delimiter=",", header=header, comments="",
               fmt="%.17g")
