"""Configuration-space primitives.

States are plain ``float64`` numpy vectors. Worlds are a box of bounds plus
axis-aligned hyperrectangle obstacles; free space is closed, so a state lying
exactly on an obstacle face is valid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ContractViolation,
    DegenerateFociError,
    InfeasibleCostError,
    SamplingStarvedError,
)

INFORMED_ATTEMPTS = 10_000
_COST_SLACK = 1e-12


def row_norms(diff: np.ndarray) -> np.ndarray:
    """Euclidean norm along the last axis; every distance goes through here
    so ties at the connection radius compare identically."""
    return np.sqrt(np.sum(diff * diff, axis=-1))


def as_state(x: Sequence[float] | np.ndarray, n: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite float vector, optionally of dimension ``n``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractViolation(f"state must be a flat vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ContractViolation(f"expected dimension {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("state coordinates must be finite")
    return arr


def distance(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(row_norms((a - b)[None, :])[0])


def unit_ball_measure(n: int) -> float:
    """Lebesgue measure of the unit ball in R^n."""
    if n <= 0:
        raise ContractViolation(f"dimension must be positive, got {n}")
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True, eq=False)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = as_state(self.lower)
        upper = as_state(self.upper, lower.shape[0])
        if not np.all(lower < upper):
            raise ContractViolation("bounds need lower < upper in every dimension")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, n: int) -> "Bounds":
        return cls(np.zeros(n), np.ones(n))

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def measure(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True, eq=False)
class AxisAlignedBox:
    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self) -> None:
        lo = as_state(self.min_corner)
        hi = as_state(self.max_corner, lo.shape[0])
        if not np.all(lo < hi):
            raise ContractViolation("obstacle needs nonzero extent in every dimension")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.max_corner - self.min_corner

    def contains_interior(self, x: np.ndarray) -> bool:
        return bool(np.all(x > self.min_corner) and np.all(x < self.max_corner))


@dataclass(frozen=True, eq=False)
class World:
    bounds: Bounds
    obstacles: tuple[AxisAlignedBox, ...] = ()
    _lo: np.ndarray = field(init=False, repr=False)
    _hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.bounds.dimension
        obstacles = tuple(self.obstacles)
        for box in obstacles:
            if box.min_corner.shape[0] != n:
                raise ContractViolation("obstacle dimension does not match bounds")
            lo = np.maximum(box.min_corner, self.bounds.lower)
            hi = np.minimum(box.max_corner, self.bounds.upper)
            if not np.all(lo < hi):
                raise ContractViolation("obstacle does not overlap the bounds")
        object.__setattr__(self, "obstacles", obstacles)
        if obstacles:
            lo = np.stack([b.min_corner for b in obstacles])
            hi = np.stack([b.max_corner for b in obstacles])
        else:
            lo = np.empty((0, n))
            hi = np.empty((0, n))
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def dimension(self) -> int:
        return self.bounds.dimension

    def smallest_obstacle_extent(self) -> float | None:
        """Smallest side length over all obstacles, clipped to the bounds."""
        if not self.obstacles:
            return None
        lo = np.maximum(self._lo, self.bounds.lower)
        hi = np.minimum(self._hi, self.bounds.upper)
        return float(np.min(hi - lo))

    def states_valid(self, points: np.ndarray) -> np.ndarray:
        """Vectorised :func:`state_valid` over the rows of ``points``."""
        points = np.atleast_2d(points)
        ok = np.all(points >= self.bounds.lower, axis=1) & np.all(
            points <= self.bounds.upper, axis=1
        )
        if self._lo.shape[0]:
            inside = np.all(
                (points[:, None, :] > self._lo[None]) & (points[:, None, :] < self._hi[None]),
                axis=2,
            )
            ok &= ~np.any(inside, axis=1)
        return ok

    def segment_candidates(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Indices of obstacles whose box overlaps the segment's bounding box."""
        seg_lo = np.minimum(a, b)
        seg_hi = np.maximum(a, b)
        hit = np.all(self._lo < seg_hi, axis=1) & np.all(self._hi > seg_lo, axis=1)
        return np.nonzero(hit)[0]

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "bounds": {
                "lower": [float(v) for v in self.bounds.lower],
                "upper": [float(v) for v in self.bounds.upper],
            },
            "obstacles": [
                {"min": [float(v) for v in b.min_corner], "max": [float(v) for v in b.max_corner]}
                for b in self.obstacles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "World":
        n = int(data["dimension"])
        bounds = Bounds(as_state(data["bounds"]["lower"], n), as_state(data["bounds"]["upper"], n))
        obstacles = tuple(
            AxisAlignedBox(as_state(o["min"], n), as_state(o["max"], n))
            for o in data.get("obstacles", [])
        )
        return cls(bounds, obstacles)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "World":
        return cls.from_dict(json.loads(text))


def state_valid(x: np.ndarray, world: World) -> bool:
    x = as_state(x, world.dimension)
    return bool(world.states_valid(x[None, :])[0])


def interpolation_count(a: np.ndarray, b: np.ndarray, resolution: float) -> int:
    """Number of states an interpolated motion check visits."""
    if resolution <= 0:
        raise ContractViolation("resolution must be positive")
    d = distance(a, b)
    return int(math.ceil(d / resolution)) + 1


def motion_valid(a: np.ndarray, b: np.ndarray, world: World, resolution: float) -> bool:
    """Check evenly spaced states from ``a`` to ``b`` (both included).

    The number of states checked is :func:`interpolation_count`.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    k = interpolation_count(a, b, resolution)
    if not (world.bounds.contains(a) and world.bounds.contains(b)):
        return False
    if not world.obstacles:
        return True
    cand = world.segment_candidates(a, b)
    if cand.size == 0:
        return True
    t = np.linspace(0.0, 1.0, k)[:, None]
    pts = a + t * (b - a)
    lo = world._lo[cand]
    hi = world._hi[cand]
    inside = np.all((pts[:, None, :] > lo[None]) & (pts[:, None, :] < hi[None]), axis=2)
    return not bool(np.any(inside))


@dataclass(frozen=True, eq=False)
class ProlateHyperspheroid:
    """Informed set of a path-length problem: foci at start and goal,
    transverse diameter equal to the current best cost."""

    focus_start: np.ndarray
    focus_goal: np.ndarray
    l_min: float
    l_curr: float
    rotation: np.ndarray

    @property
    def dimension(self) -> int:
        return self.focus_start.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.focus_start + self.focus_goal)

    @property
    def semi_axes(self) -> np.ndarray:
        conj = math.sqrt(max((self.l_curr - self.l_min) * (self.l_curr + self.l_min), 0.0)) / 2.0
        axes = np.full(self.dimension, conj)
        axes[0] = self.l_curr / 2.0
        return axes

    def focal_sum(self, x: np.ndarray) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return distance(x, self.focus_start) + distance(x, self.focus_goal)
        return row_norms(x - self.focus_start) + row_norms(x - self.focus_goal)


def _rotation_to_world(axis: np.ndarray) -> np.ndarray:
    """Orthonormal basis whose first column is ``axis``.

    Gram-Schmidt over the standard basis, skipping the basis vector most
    parallel to ``axis``.
    """
    n = axis.shape[0]
    skip = int(np.argmax(np.abs(axis)))
    cols = [axis]
    for i in range(n):
        if i == skip:
            continue
        v = np.zeros(n)
        v[i] = 1.0
        for c in cols:
            v = v - np.dot(v, c) * c
        cols.append(v / np.linalg.norm(v))
    return np.column_stack(cols)


def phs_from_solution(start, goal, cost: float) -> ProlateHyperspheroid:
    start = as_state(start)
    goal = as_state(goal, start.shape[0])
    l_min = distance(start, goal)
    if l_min == 0.0:
        raise DegenerateFociError("start and goal coincide")
    if cost < l_min * (1.0 - _COST_SLACK):
        raise InfeasibleCostError(f"cost {cost} is below the focal distance {l_min}")
    axis = (goal - start) / l_min
    return ProlateHyperspheroid(start, goal, l_min, max(float(cost), l_min), _rotation_to_world(axis))


def phs_measure(phs: ProlateHyperspheroid) -> float:
    n = phs.dimension
    conj = math.sqrt(max((phs.l_curr - phs.l_min) * (phs.l_curr + phs.l_min), 0.0)) / 2.0
    return (phs.l_curr / 2.0) * conj ** (n - 1) * unit_ball_measure(n)


def sample_uniform(bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(bounds.lower, bounds.upper)


def sample_uniform_many(bounds: Bounds, rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(bounds.lower, bounds.upper, size=(count, bounds.dimension))


def _unit_ball(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    z = rng.standard_normal((count, n))
    norms = np.linalg.norm(z, axis=1)
    norms[norms == 0.0] = 1.0
    r = rng.random(count) ** (1.0 / n)
    return z * (r / norms)[:, None]


def _phs_transform(phs: ProlateHyperspheroid, ball: np.ndarray) -> np.ndarray:
    return phs.center + (ball * phs.semi_axes) @ phs.rotation.T


def sample_informed(
    phs: ProlateHyperspheroid,
    bounds: Bounds,
    rng: np.random.Generator,
    max_attempts: int = INFORMED_ATTEMPTS,
) -> np.ndarray:
    """One state uniformly distributed on ``phs`` intersected with ``bounds``."""
    for _ in range(max_attempts):
        x = _phs_transform(phs, _unit_ball(rng, 1, phs.dimension))[0]
        if bounds.contains(x):
            return x
    raise SamplingStarvedError(f"no in-bounds informed sample after {max_attempts} attempts")


def sample_informed_many(
    phs: ProlateHyperspheroid,
    bounds: Bounds,
    rng: np.random.Generator,
    count: int,
    max_attempts: int = INFORMED_ATTEMPTS,
) -> np.ndarray:
    """Vectorised :func:`sample_informed`; the budget is per accepted state."""
    n = phs.dimension
    out: list[np.ndarray] = []
    have = 0
    attempts = 0
    while have < count:
        chunk = max(16, 2 * (count - have))
        x = _phs_transform(phs, _unit_ball(rng, chunk, n))
        ok = np.all(x >= bounds.lower, axis=1) & np.all(x <= bounds.upper, axis=1)
        x = x[ok][: count - have]
        attempts += chunk
        if x.shape[0] == 0 and attempts > max_attempts * (have + 1):
            raise SamplingStarvedError(
                f"no in-bounds informed sample after {attempts} attempts"
            )
        out.append(x)
        have += x.shape[0]
    return np.concatenate(out) if out else np.empty((0, n))


def path_length(path: Iterable[np.ndarray]) -> float:
    pts = [np.asarray(p, dtype=np.float64) for p in path]
    return float(sum(distance(a, b) for a, b in zip(pts[:-1], pts[1:])))
