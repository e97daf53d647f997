"""Bounded Lipschitz classes on boxes: covers, partitions of unity, liftings.

Functions live on ``Omega = [-gamma, gamma]^d`` and belong to the class
when they are ``L``-Lipschitz with sup-norm at most ``beta``.  Covers are
axis-aligned grids of closed Euclidean balls; partitions of unity are
normalized tent functions subordinate to those balls.  Projection samples
a function at the ball centers; lifting rebuilds a function from such
samples.  For an ``L``-Lipschitz function the lift differs from the
original by at most ``L * delta`` in sup-norm.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CoverageError, ParameterError

_DEGENERATE_EPS = 1e-300


@dataclass(frozen=True)
class LipschitzClassSpec:
    """Class of ``lip``-Lipschitz functions bounded by ``bound`` on ``[-gamma, gamma]^d``."""

    d: int
    gamma: float
    lip: float
    bound: float

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.d}")
        if self.gamma <= 0:
            raise ParameterError(f"domain half-width must be positive, got {self.gamma}")
        if self.lip < 0 or self.bound < 0:
            raise ParameterError("Lipschitz and sup-norm bounds must be nonnegative")


@dataclass(frozen=True)
class BallCover:
    """Closed Euclidean balls of common ``radius`` centered at ``centers``.

    ``centers`` has shape (n, d).  ``gamma`` records the covered box.
    """

    d: int
    gamma: float
    radius: float
    centers: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim != 2 or centers.shape[1] != self.d:
            raise ParameterError(f"centers must have shape (n, {self.d}), got {centers.shape}")
        if centers.shape[0] < 1:
            raise ParameterError("a cover needs at least one center")
        if self.radius <= 0:
            raise ParameterError(f"radius must be positive, got {self.radius}")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)

    @property
    def size(self) -> int:
        return self.centers.shape[0]


def uniform_grid(gamma: float, d: int, n_per_axis: int) -> np.ndarray:
    """Uniform tensor grid of shape (n_per_axis^d, d) on ``[-gamma, gamma]^d``."""
    if n_per_axis < 1:
        raise ParameterError(f"need at least one grid node per axis, got {n_per_axis}")
    axis = np.linspace(-gamma, gamma, n_per_axis) if n_per_axis > 1 else np.zeros(1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def build_cover(spec: LipschitzClassSpec, delta: float) -> BallCover:
    """Axis-aligned grid cover of ``[-gamma, gamma]^d`` by ``delta``-balls.

    Per axis the box splits into ``m = max(1, ceil(gamma * sqrt(d) / delta))``
    equal cells and centers sit at cell midpoints, so per-axis spacing is
    ``2 * delta / sqrt(d)`` or finer and every point of the box lies within
    ``delta`` of a center.
    """
    if delta <= 0:
        raise ParameterError(f"cover radius must be positive, got {delta}")
    m = max(1, math.ceil(spec.gamma * math.sqrt(spec.d) / delta))
    step = 2.0 * spec.gamma / m
    axis = -spec.gamma + step * (np.arange(m) + 0.5)
    grids = np.meshgrid(*([axis] * spec.d), indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=-1)
    return BallCover(d=spec.d, gamma=spec.gamma, radius=delta, centers=centers)


def coverage_defect(cover: BallCover, mesh: float | None = None) -> float:
    """Max over a test grid of the distance to the nearest center."""
    mesh = cover.radius / 4.0 if mesh is None else mesh
    n_axis = max(2, math.ceil(2.0 * cover.gamma / mesh) + 1)
    grid = uniform_grid(cover.gamma, cover.d, n_axis)
    dist = _distances(grid, cover.centers)
    return float(dist.min(axis=1).max())


def _distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix of shape (len(points), len(centers))."""
    diff = points[:, None, :] - centers[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


class PartitionOfUnity:
    """Normalized tent functions subordinate to a ball cover.

    ``t_i(x) = max(0, 1 - |x - c_i| / delta)`` and ``rho_i = t_i / sum_j t_j``.
    Where every tent vanishes (a measure-zero set on a valid cover) the
    weight collapses onto the nearest center, lowest index first, which
    keeps the weights a partition of unity everywhere on the box.
    """

    def __init__(self, cover: BallCover):
        self.cover = cover

    @property
    def size(self) -> int:
        return self.cover.size

    def weights(self, x: np.ndarray) -> np.ndarray:
        return self.weights_many(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def weights_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.cover.d:
            raise ParameterError(f"points must have shape (m, {self.cover.d}), got {xs.shape}")
        dist = _distances(xs, self.cover.centers)
        tents = np.maximum(0.0, 1.0 - dist / self.cover.radius)
        sums = tents.sum(axis=1)
        degenerate = sums <= _DEGENERATE_EPS
        if np.any(degenerate):
            bad = dist[degenerate].min(axis=1) > self.cover.radius * (1.0 + 1e-12)
            if np.any(bad):
                raise CoverageError(
                    "a queried point lies outside every ball of the cover"
                )
            nearest = np.argmin(dist[degenerate], axis=1)
            tents[degenerate] = 0.0
            tents[np.nonzero(degenerate)[0], nearest] = 1.0
            sums = tents.sum(axis=1)
        return tents / sums[:, None]


def build_pou(cover: BallCover, check_mesh: float | None = None) -> PartitionOfUnity:
    """Build the normalized tent partition after verifying coverage.

    Coverage is verified on a test grid of mesh ``delta / 4`` by default;
    a grid point farther than ``delta`` from every center raises
    ``CoverageError``.
    """
    defect = coverage_defect(cover, mesh=check_mesh)
    if defect > cover.radius * (1.0 + 1e-12):
        raise CoverageError(
            f"cover with radius {cover.radius} leaves points at distance {defect} uncovered"
        )
    return PartitionOfUnity(cover)


def project(f: Callable, sensors: np.ndarray) -> np.ndarray:
    """Sample ``f`` at sensor locations, returning the vector of values."""
    sensors = np.asarray(sensors, dtype=float)
    if sensors.ndim != 2:
        raise ParameterError(f"sensors must have shape (n, d), got {sensors.shape}")
    try:
        values = np.asarray(f(sensors), dtype=float)
        if values.shape == (sensors.shape[0],):
            return values
    except Exception:
        pass
    return np.array([float(f(s)) for s in sensors], dtype=float)


class LiftedFunction:
    """``x -> sum_i coeffs[i] * rho_i(x)`` for a partition of unity ``rho``."""

    def __init__(self, coeffs: np.ndarray, pou: PartitionOfUnity):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (pou.size,):
            raise ParameterError(
                f"coefficient count {coeffs.shape} does not match cover size {pou.size}"
            )
        self.coeffs = coeffs
        self.pou = pou

    def __call__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return float(self.pou.weights(x) @ self.coeffs)
        return self.pou.weights_many(x) @ self.coeffs


def lift(coeffs: np.ndarray, pou: PartitionOfUnity) -> LiftedFunction:
    """Rebuild a function from sensor values through the partition of unity.

    The result takes values inside ``[min(coeffs), max(coeffs)]`` since the
    weights are a convex combination, and satisfies the contraction
    ``sup |lift(z) - lift(w)| <= |z - w|_2``.
    """
    return LiftedFunction(coeffs, pou)


def lift_error(f: Callable, pou: PartitionOfUnity, test_grid: np.ndarray) -> float:
    """Sup over the grid of ``|f - lift(project(f))|``.

    For an ``L``-Lipschitz ``f`` this is at most ``L * delta`` because each
    weight is supported in a ball of radius ``delta`` around its center.
    """
    test_grid = np.asarray(test_grid, dtype=float)
    if test_grid.ndim == 1:
        test_grid = test_grid[:, None]
    coeffs = project(f, pou.cover.centers)
    lifted = lift(coeffs, pou)
    f_vals = project(f, test_grid)
    return float(np.max(np.abs(f_vals - lifted(test_grid))))


@dataclass(frozen=True)
class MembershipViolation:
    """A class-membership failure: which bound, measured value, allowed value."""

    bound: str
    measured: float
    allowed: float


def membership_check(
    f: Callable,
    spec: LipschitzClassSpec,
    grid: np.ndarray,
    tol: float = 1e-9,
    max_pair_points: int = 800,
    pair_seed: int = 0,
) -> list[MembershipViolation]:
    """Spot-check class membership of ``f`` on a grid.

    Checks ``max |f| <= bound`` over the grid and difference quotients
    ``|f(x) - f(y)| / |x - y| <= lip * (1 + tol)`` over grid pairs.  All
    pairs are used up to ``max_pair_points`` grid points; beyond that a
    deterministic subsample of that size (plus consecutive pairs in grid
    order) keeps the cost quadratic in the cap rather than the grid.
    Returns the worst offender per bound; empty means no violation found.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[0] < 2:
        raise ParameterError("membership check needs at least two grid points")
    values = project(f, grid)
    violations: list[MembershipViolation] = []
    sup = float(np.max(np.abs(values)))
    if sup > spec.bound * (1.0 + tol):
        violations.append(MembershipViolation("bound", sup, spec.bound))

    if grid.shape[0] > max_pair_points:
        rng = np.random.default_rng(pair_seed)
        keep = np.sort(rng.choice(grid.shape[0], size=max_pair_points, replace=False))
        pts, vals = grid[keep], values[keep]
        quot = _pairwise_quotients(pts, vals)
        consec = np.abs(np.diff(values)) / np.maximum(
            np.linalg.norm(np.diff(grid, axis=0), axis=1), 1e-300
        )
        worst = max(quot, float(consec.max()) if consec.size else 0.0)
    else:
        worst = _pairwise_quotients(grid, values)
    if worst > spec.lip * (1.0 + tol):
        violations.append(MembershipViolation("lipschitz", worst, spec.lip))
    return violations


def _pairwise_quotients(points: np.ndarray, values: np.ndarray) -> float:
    dist = _distances(points, points)
    diff = np.abs(values[:, None] - values[None, :])
    mask = dist > 1e-14
    if not np.any(mask):
        return 0.0
    return float(np.max(diff[mask] / dist[mask]))


def cover_to_dict(cover: BallCover) -> dict:
    return {
        "d": cover.d,
        "gamma": cover.gamma,
        "delta": cover.radius,
        "centers": cover.centers.tolist(),
    }


def cover_from_dict(data: dict) -> BallCover:
    try:
        return BallCover(
            d=int(data["d"]),
            gamma=float(data["gamma"]),
            radius=float(data["delta"]),
            centers=np.array(data["centers"], dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed cover dict: {exc}") from exc


def save_cover(cover: BallCover, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cover_to_dict(cover), fh)


def load_cover(path) -> BallCover:
    with open(path, "r", encoding="utf-8") as fh:
        return cover_from_dict(json.load(fh))


def save_sampled_function(path, sensors: np.ndarray, values: np.ndarray) -> None:
    """CSV rows of (sensor coordinates ..., value)."""
    sensors = np.asarray(sensors, dtype=float)
    values = np.asarray(values, dtype=float)
    if sensors.ndim != 2 or values.shape != (sensors.shape[0],):
        raise ParameterError("sensors must be (n, d) with one value per sensor")
    d = sensors.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(d)] + ["value"])
        for row, val in zip(sensors, values):
            writer.writerow([repr(float(c)) for c in row] + [repr(float(val))])


def load_sampled_function(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 1
        sensors, values = [], []
        for row in reader:
            sensors.append([float(c) for c in row[:d]])
            values.append(float(row[d]))
    return np.array(sensors, dtype=float), np.array(values, dtype=float)
