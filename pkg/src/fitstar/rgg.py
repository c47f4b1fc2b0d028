"""Implicit random geometric graph: sample bookkeeping, connection radius,
radius neighbour queries and informed-set pruning."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np

from .errors import ContractViolation, RadiusUndefinedError
from .geometry import ProlateHyperspheroid, as_state, row_norms, unit_ball_measure

BRUTE_FORCE_LIMIT = 2000


def rgg_radius(q: int, informed_measure: float, n: int, eta: float) -> float:
    """Shrinking connection radius for ``q`` states in a set of measure
    ``informed_measure`` (natural log)."""
    if q < 2:
        raise RadiusUndefinedError(f"radius needs q >= 2, got {q}")
    if informed_measure <= 0:
        raise ContractViolation("informed measure must be positive")
    if n < 2:
        raise ContractViolation("dimension must be at least 2")
    if eta <= 1:
        raise ContractViolation("eta must exceed 1")
    ratio = informed_measure / unit_ball_measure(n)
    return eta * (2.0 * (1.0 + 1.0 / n) * ratio * (math.log(q) / q)) ** (1.0 / n)


class _GridIndex:
    """Uniform grid over alive states with cell side equal to the query radius."""

    def __init__(self, coords: np.ndarray, indices: np.ndarray, cell: float):
        self.cell = cell
        self.indices = indices
        self.keys = np.floor(coords[indices] / cell).astype(np.int64)
        self.cells: dict[tuple[int, ...], list[int]] = defaultdict(list)
        for i, key in zip(indices.tolist(), map(tuple, self.keys.tolist())):
            self.cells[key].append(i)
        n = coords.shape[1]
        # 3^n hash probes stop paying off once they outnumber occupied cells
        self.offsets = (
            list(itertools.product((-1, 0, 1), repeat=n)) if 3**n <= len(self.cells) else None
        )

    def candidates(self, x: np.ndarray) -> np.ndarray:
        base_arr = np.floor(x / self.cell).astype(np.int64)
        if self.offsets is None:
            near = np.all(np.abs(self.keys - base_arr) <= 1, axis=1)
            return self.indices[near]
        base = base_arr.tolist()
        out: list[int] = []
        for off in self.offsets:
            bucket = self.cells.get(tuple(b + o for b, o in zip(base, off)))
            if bucket:
                out.extend(bucket)
        return np.asarray(out, dtype=np.int64)


class SampleSet:
    """Growable store of states with lazy (flag-based) deletion.

    Index 0 is the start; the goals follow it. Indices are never reused.
    """

    def __init__(self, start, goals, capacity: int = 256):
        start = as_state(start)
        n = start.shape[0]
        goals = [as_state(g, n) for g in goals]
        if not goals:
            raise ContractViolation("at least one goal is required")
        self.dimension = n
        self._coords = np.empty((max(capacity, 1 + len(goals)), n))
        self._alive = np.zeros(self._coords.shape[0], dtype=bool)
        self.size = 0
        self.version = 0
        self._grid: tuple[int, float, _GridIndex] | None = None
        self._view: tuple[int, np.ndarray, np.ndarray] | None = None
        self.start_index = 0
        self.goal_indices = tuple(range(1, 1 + len(goals)))
        self.add(np.vstack([start] + goals))

    @property
    def coords(self) -> np.ndarray:
        return self._coords[: self.size]

    @property
    def alive(self) -> np.ndarray:
        view = self._alive[: self.size]
        view.flags.writeable = False
        return view

    def kill(self, indices) -> None:
        """Mark ``indices`` dead (terminals included; callers decide)."""
        self._alive[np.asarray(indices, dtype=np.int64)] = False
        self.version += 1

    @property
    def start(self) -> np.ndarray:
        return self._coords[0]

    @property
    def goals(self) -> np.ndarray:
        return self._coords[1 : 1 + len(self.goal_indices)]

    def is_terminal(self, i: int) -> bool:
        return i <= len(self.goal_indices)

    def add(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        k = states.shape[0]
        if self.size + k > self._coords.shape[0]:
            cap = max(2 * self._coords.shape[0], self.size + k)
            coords = np.empty((cap, self.dimension))
            coords[: self.size] = self.coords
            alive = np.zeros(cap, dtype=bool)
            alive[: self.size] = self._alive[: self.size]
            self._coords, self._alive = coords, alive
        idx = np.arange(self.size, self.size + k)
        self._coords[idx] = states
        self._alive[idx] = True
        self.size += k
        self.version += 1
        return idx

    def alive_indices(self) -> np.ndarray:
        return np.nonzero(self.alive)[0]

    def alive_count(self) -> int:
        return int(np.count_nonzero(self.alive))

    def focal_sums(self, states: np.ndarray | None = None) -> np.ndarray:
        """Smallest start-to-goal detour length through each state."""
        pts = self.coords if states is None else np.atleast_2d(states)
        to_start = row_norms(pts - self.start)
        to_goal = np.min(
            np.stack([row_norms(pts - g) for g in self.goals]), axis=0
        )
        return to_start + to_goal

    def count_in_informed(self, cost: float) -> int:
        if not math.isfinite(cost):
            return self.alive_count()
        inside = self.focal_sums() <= cost
        return int(np.count_nonzero(inside & self.alive))

    def prune_outside(self, cost: float) -> int:
        """Kill non-terminal states that cannot lie on a path cheaper than ``cost``."""
        if not math.isfinite(cost):
            return 0
        outside = self._alive[: self.size] & (self.focal_sums() > cost)
        outside[: 1 + len(self.goal_indices)] = False
        count = int(np.count_nonzero(outside))
        if count:
            self.kill(np.nonzero(outside)[0])
        return count

    def neighbors(self, idx: int, r: float) -> tuple[np.ndarray, np.ndarray]:
        """Alive states within distance ``r`` of state ``idx`` (closed ball),
        excluding ``idx`` itself; returns ``(indices, distances)``."""
        if r <= 0:
            raise ContractViolation("radius must be positive")
        x = self._coords[idx]
        cand, pts = self._alive_view()
        if cand.shape[0] > BRUTE_FORCE_LIMIT:
            cand = self._grid_for(r).candidates(x)
            pts = self._coords[cand]
        d = row_norms(pts - x)
        keep = (d <= r) & (cand != idx)
        return cand[keep], d[keep]

    def _alive_view(self) -> tuple[np.ndarray, np.ndarray]:
        if self._view is None or self._view[0] != self.version:
            idx = self.alive_indices()
            self._view = (self.version, idx, self._coords[idx])
        return self._view[1], self._view[2]

    def _grid_for(self, r: float) -> _GridIndex:
        if self._grid is None or self._grid[0] != self.version or self._grid[1] != r:
            self._grid = (self.version, r, _GridIndex(self.coords, self.alive_indices(), r))
        return self._grid[2]


def neighbors(idx: int, samples: SampleSet, r: float) -> np.ndarray:
    return samples.neighbors(idx, r)[0]


def prune(samples: SampleSet, phs: ProlateHyperspheroid | None) -> int:
    if phs is None:
        return 0
    return samples.prune_outside(phs.l_curr)
