"""Reference planners: RRT-Connect (first feasible path) and Informed RRT*
(anytime, informed sampling after the first solution).

Both use the same validity checks as the core planner and report a
:class:`~fitstar.search.PlannerResult`.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import (
    World,
    interpolation_count,
    motion_valid,
    phs_from_solution,
    phs_measure,
    row_norms,
    sample_informed_many,
    sample_uniform_many,
)
from .rgg import rgg_radius
from .search import INF, Budget, PlannerResult, Problem, default_resolutions


@dataclass
class RrtConfig:
    goal_bias: float = 0.05
    max_edge_length: float | None = None
    resolution: float | None = None
    eta: float = 1.1
    record_samples: bool = False

    def validate(self) -> "RrtConfig":
        if not 0.0 <= self.goal_bias < 1.0:
            raise ConfigError("goal_bias must lie in [0, 1)")
        if self.max_edge_length is not None and not self.max_edge_length > 0:
            raise ConfigError("max_edge_length must be positive")
        if self.resolution is not None and not self.resolution > 0:
            raise ConfigError("resolution must be positive")
        if not self.eta > 1:
            raise ConfigError("eta must exceed 1")
        return self

    def edge_length(self, n: int) -> float:
        return self.max_edge_length if self.max_edge_length is not None else 0.3 * math.sqrt(n)

    def check_resolution(self, world: World) -> float:
        return self.resolution if self.resolution is not None else default_resolutions(world)[0]


class _Tree:
    """Growable vertex store with parent pointers."""

    def __init__(self, n: int, capacity: int = 1024):
        self.coords = np.empty((capacity, n))
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.size = 0

    def add(self, x: np.ndarray, parent: int) -> int:
        if self.size == self.coords.shape[0]:
            self.coords = np.vstack([self.coords, np.empty_like(self.coords)])
            self.parent = np.concatenate([self.parent, np.full(self.parent.shape[0], -1)])
        i = self.size
        self.coords[i] = x
        self.parent[i] = parent
        self.size += 1
        return i

    def nearest(self, x: np.ndarray) -> tuple[int, float]:
        d = row_norms(self.coords[: self.size] - x)
        i = int(np.argmin(d))
        return i, float(d[i])

    def within(self, x: np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
        d = row_norms(self.coords[: self.size] - x)
        idx = np.nonzero(d <= r)[0]
        return idx, d[idx]

    def branch(self, i: int) -> list[np.ndarray]:
        """States from vertex ``i`` back to its root."""
        out = []
        while i >= 0:
            out.append(self.coords[i].copy())
            i = int(self.parent[i])
        return out


def _steer(a: np.ndarray, b: np.ndarray, step: float) -> tuple[np.ndarray, bool]:
    d = float(np.linalg.norm(b - a))
    if d <= step:
        return b.copy(), True
    return a + (b - a) * (step / d), False


def _path_cost(path: list[np.ndarray]) -> float:
    if len(path) < 2:
        return 0.0
    return float(np.sum(row_norms(np.diff(np.asarray(path), axis=0))))


class _Base:
    name = ""

    def __init__(self, problem: Problem, config: RrtConfig | None, seed):
        self.problem = problem
        self.world = problem.world
        self.config = (config or RrtConfig()).validate()
        self.n = self.world.dimension
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.step_length = self.config.edge_length(self.n)
        self.resolution = self.config.check_resolution(self.world)
        self.counters = {"samples": 0, "sparse_checks": 0, "dense_checks": 0, "batches": 0}
        self.trace: list[tuple[float, float]] = []
        self.path: list[np.ndarray] = []
        self.iterations = 0
        self._digest = hashlib.sha256()
        self._t0 = 0.0

    def motion_valid(self, a: np.ndarray, b: np.ndarray) -> bool:
        self.counters["dense_checks"] += interpolation_count(a, b, self.resolution)
        return motion_valid(a, b, self.world, self.resolution)

    def _sample(self) -> np.ndarray:
        x = sample_uniform_many(self.world.bounds, self.rng, 1)[0]
        self._note(x)
        return x

    def _note(self, x: np.ndarray) -> None:
        self._digest.update(np.ascontiguousarray(x).tobytes())
        self.counters["samples"] += 1

    def _solved(self, path: list[np.ndarray]) -> None:
        cost = _path_cost(path)
        if self.trace and cost >= self.trace[-1][1]:
            return
        self.path = path
        self.trace.append((time.perf_counter() - self._t0, cost))

    def step(self) -> None:
        raise NotImplementedError

    @property
    def done(self) -> bool:
        return False

    def solve(self, budget: Budget) -> PlannerResult:
        self.problem.validate()
        self._t0 = time.perf_counter()
        if not budget.empty:
            while not self.done and not budget.exhausted(
                time.perf_counter() - self._t0, self.iterations
            ):
                self.iterations += 1
                self.step()
        return self.result()

    def result(self) -> PlannerResult:
        success = bool(self.trace)
        return PlannerResult(
            planner=self.name,
            success=success,
            initial_time_s=self.trace[0][0] if success else INF,
            initial_cost=self.trace[0][1] if success else INF,
            final_cost=self.trace[-1][1] if success else INF,
            trace=list(self.trace),
            counters=dict(self.counters),
            path=[s.tolist() for s in self.path],
            iterations=self.iterations,
            sample_digest=self._digest.hexdigest(),
        )


class RrtConnect(_Base):
    """Bidirectional RRT; stops at the first connection."""

    name = "rrt-connect"

    def __init__(self, problem: Problem, config: RrtConfig | None = None, seed=None):
        super().__init__(problem, config, seed)
        self.tree_a = _Tree(self.n)
        self.tree_a.add(problem.start, -1)
        self.tree_b = _Tree(self.n)
        for g in problem.goals:
            self.tree_b.add(g, -1)
        self.a_is_start = True

    @property
    def done(self) -> bool:
        return bool(self.trace)

    def _extend(self, tree: _Tree, target: np.ndarray) -> tuple[str, int]:
        near, _ = tree.nearest(target)
        x, reached = _steer(tree.coords[near], target, self.step_length)
        if not self.motion_valid(tree.coords[near], x):
            return "trapped", -1
        i = tree.add(x, near)
        return ("reached" if reached else "advanced"), i

    def _connect(self, tree: _Tree, target: np.ndarray) -> tuple[str, int]:
        while True:
            status, i = self._extend(tree, target)
            if status != "advanced":
                return status, i

    def step(self) -> None:
        q = self._sample()
        status, i = self._extend(self.tree_a, q)
        if status != "trapped":
            x = self.tree_a.coords[i]
            status_b, j = self._connect(self.tree_b, x)
            if status_b == "reached":
                branch_a = self.tree_a.branch(i)
                branch_b = self.tree_b.branch(j)[1:]
                if self.a_is_start:
                    path = branch_a[::-1] + branch_b
                else:
                    path = branch_b[::-1] + branch_a
                self._solved(path)
                return
        self.tree_a, self.tree_b = self.tree_b, self.tree_a
        self.a_is_start = not self.a_is_start


class InformedRrtStar(_Base):
    """RRT* with goal bias whose sampling switches to the informed set once a
    solution exists."""

    name = "informed-rrt-star"

    def __init__(self, problem: Problem, config: RrtConfig | None = None, seed=None):
        super().__init__(problem, config, seed)
        self.tree = _Tree(self.n)
        self.tree.add(problem.start, -1)
        self.cost = [0.0]
        self.children: list[list[int]] = [[]]
        self.goal_vertex: dict[int, int] = {}
        self.goals = np.asarray(problem.goals)
        self.post_solution_samples: list[np.ndarray] = []

    @property
    def best_cost(self) -> float:
        return min((self.cost[v] for v in self.goal_vertex.values()), default=INF)

    def _sample(self) -> np.ndarray:
        if self.rng.random() < self.config.goal_bias:
            x = self.goals[self.rng.integers(len(self.goals))].copy()
            self._note(x)
            return x
        c = self.best_cost
        if math.isinf(c):
            return super()._sample()
        phs = [
            phs_from_solution(self.problem.start, g, c)
            for g in self.goals
            if np.linalg.norm(g - self.problem.start) <= c
        ]
        if len(phs) == 1:
            x = sample_informed_many(phs[0], self.world.bounds, self.rng, 1)[0]
        else:
            # uniform on the union: pick a member by measure, then keep the
            # draw with probability 1 / (number of members containing it)
            weights = np.array([phs_measure(p) for p in phs])
            if weights.sum() <= 0:
                weights = np.ones(len(phs))
            while True:
                p = phs[self.rng.choice(len(phs), p=weights / weights.sum())]
                x = sample_informed_many(p, self.world.bounds, self.rng, 1)[0]
                inside = sum(bool(q.focal_sum(x[None, :])[0] <= q.l_curr) for q in phs)
                if self.rng.random() * max(inside, 1) < 1.0:
                    break
        self._note(x)
        if self.config.record_samples:
            self.post_solution_samples.append(x.copy())
        return x

    def _radius(self) -> float:
        c = self.best_cost
        measure = self.world.bounds.measure
        if math.isfinite(c) and len(self.goals) == 1:
            measure = min(measure, phs_measure(phs_from_solution(self.problem.start, self.goals[0], c)))
        q = max(self.tree.size + 1, 2)
        return min(rgg_radius(q, max(measure, 1e-300), self.n, self.config.eta), self.step_length)

    def _propagate(self, v: int, delta: float) -> None:
        stack = list(self.children[v])
        while stack:
            u = stack.pop()
            self.cost[u] -= delta
            stack.extend(self.children[u])

    def _goal_index(self, x: np.ndarray) -> int | None:
        hits = np.nonzero(np.all(self.goals == x, axis=1))[0]
        return int(hits[0]) if hits.size else None

    def step(self) -> None:
        q = self._sample()
        near, _ = self.tree.nearest(q)
        x, _ = _steer(self.tree.coords[near], q, self.step_length)
        g = self._goal_index(x)
        if g is not None and g in self.goal_vertex:
            x_idx = self.goal_vertex[g]
            if x_idx == near:
                return
        if not self.motion_valid(self.tree.coords[near], x):
            return
        idx, dist = self.tree.within(x, self._radius())
        best_parent, best_cost = near, self.cost[near] + float(np.linalg.norm(x - self.tree.coords[near]))
        for j, d in sorted(zip(idx.tolist(), dist.tolist()), key=lambda p: self.cost[p[0]] + p[1]):
            if self.cost[j] + d >= best_cost:
                break
            if j != near and self.motion_valid(self.tree.coords[j], x):
                best_parent, best_cost = j, self.cost[j] + d
                break
        if g is not None and g in self.goal_vertex:
            # the goal is already a vertex: treat the draw as a rewiring attempt
            v = self.goal_vertex[g]
            if best_cost < self.cost[v] and best_parent != v:
                self._reparent(v, best_parent, best_cost)
        else:
            v = self.tree.add(x, best_parent)
            self.cost.append(best_cost)
            self.children.append([])
            self.children[best_parent].append(v)
            if g is not None:
                self.goal_vertex[g] = v
        for j, d in zip(idx.tolist(), dist.tolist()):
            if j == v or j == best_parent:
                continue
            new_cost = self.cost[v] + d
            if new_cost < self.cost[j] and self.motion_valid(x, self.tree.coords[j]):
                if self._is_ancestor(j, v):
                    continue
                self._reparent(j, v, new_cost)
        c = self.best_cost
        if math.isfinite(c):
            g_best = min(self.goal_vertex.values(), key=lambda u: self.cost[u])
            self._solved(self.tree.branch(g_best)[::-1])

    def _is_ancestor(self, a: int, v: int) -> bool:
        while v >= 0:
            if v == a:
                return True
            v = int(self.tree.parent[v])
        return False

    def _reparent(self, j: int, new_parent: int, new_cost: float) -> None:
        old = int(self.tree.parent[j])
        if old >= 0:
            self.children[old].remove(j)
        self.tree.parent[j] = new_parent
        self.children[new_parent].append(j)
        delta = self.cost[j] - new_cost
        self.cost[j] = new_cost
        self._propagate(j, delta)


def rrt_connect_solve(
    problem: Problem, config: RrtConfig | None = None, stop: Budget | float = 1.0, seed=None
) -> PlannerResult:
    budget = stop if isinstance(stop, Budget) else Budget(time_s=float(stop))
    return RrtConnect(problem, config, seed).solve(budget)


def informed_rrt_star_solve(
    problem: Problem, config: RrtConfig | None = None, stop: Budget | float = 1.0, seed=None
) -> PlannerResult:
    budget = stop if isinstance(stop, Budget) else Budget(time_s=float(stop))
    return InformedRrtStar(problem, config, seed).solve(budget)
