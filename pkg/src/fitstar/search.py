"""Asymmetric bidirectional anytime search over a batched implicit RGG.

A reverse search rooted at the goals computes admissible cost-to-go and
effort estimates using cheap (sparse) interpolated collision checks. A forward
search from the start follows those estimates and only commits edges that
also pass the dense check. When neither queue can improve the current
solution the batch ends: states that cannot improve the solution are pruned,
the batch controller picks the next batch size and a new batch is drawn
(from the informed set once a solution exists).
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .batch import BatchController, check_strategy
from .errors import ConfigError, ContractViolation
from .geometry import (
    World,
    as_state,
    distance,
    interpolation_count,
    motion_valid,
    phs_from_solution,
    phs_measure,
    row_norms,
    sample_informed_many,
    sample_uniform_many,
    state_valid,
)
from .rgg import SampleSet, rgg_radius

INF = math.inf
DEFAULT_EMPTY_WORLD_RESOLUTION = 0.01
MIN_RESOLUTION = 1e-3


@dataclass
class Problem:
    world: World
    start: np.ndarray
    goals: list[np.ndarray]

    def __post_init__(self) -> None:
        n = self.world.dimension
        self.start = as_state(self.start, n)
        self.goals = [as_state(g, n) for g in self.goals]
        if not self.goals:
            raise ContractViolation("at least one goal is required")

    def validate(self) -> None:
        if not state_valid(self.start, self.world):
            raise ContractViolation("start state is not in free space")
        for g in self.goals:
            if not state_valid(g, self.world):
                raise ContractViolation("goal state is not in free space")


def default_resolutions(world: World) -> tuple[float, float]:
    """Dense and sparse interpolation step for ``world``.

    Dense is a quarter of the thinnest obstacle side (floored); sparse is ten
    times coarser but never coarser than the thinnest side, so sparse checks
    still catch walls crossed transversely.
    """
    thinnest = world.smallest_obstacle_extent()
    if thinnest is None:
        return DEFAULT_EMPTY_WORLD_RESOLUTION, 10 * DEFAULT_EMPTY_WORLD_RESOLUTION
    dense = max(0.25 * thinnest, MIN_RESOLUTION)
    sparse = min(10.0 * dense, max(thinnest, dense))
    return dense, sparse


@dataclass
class PlannerConfig:
    strategy: str = "fit-sl"
    eta: float = 1.1
    batch: int = 100
    dense_resolution: float | None = None
    sparse_resolution: float | None = None
    inflation: float = 1.0
    truncation: float = 1.0
    radius_count: str = "informed"
    radius: float | None = None
    iteration_budget: int = 100
    informed_attempts: int = 10_000

    def validate(self) -> "PlannerConfig":
        check_strategy(self.strategy)
        if not self.eta > 1:
            raise ConfigError(f"eta must exceed 1, got {self.eta}")
        if self.batch < 1:
            raise ConfigError("batch must be at least 1")
        for name in ("dense_resolution", "sparse_resolution", "radius"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        if self.inflation < 1 or self.truncation < 1:
            raise ConfigError("inflation and truncation factors must be >= 1")
        if self.radius_count not in ("informed", "all"):
            raise ConfigError("radius_count must be 'informed' or 'all'")
        return self

    def resolutions(self, world: World) -> tuple[float, float]:
        dense, sparse = default_resolutions(world)
        if self.dense_resolution is not None:
            dense = self.dense_resolution
            sparse = 10.0 * dense if self.sparse_resolution is None else sparse
        if self.sparse_resolution is not None:
            sparse = self.sparse_resolution
        return dense, sparse


@dataclass(frozen=True)
class Budget:
    """Stop after ``time_s`` seconds or ``iterations`` search steps,
    whichever comes first; ``None`` disables that limit."""

    time_s: float | None = None
    iterations: int | None = None

    def __post_init__(self) -> None:
        if self.time_s is None and self.iterations is None:
            raise ContractViolation("a budget needs a time or an iteration limit")
        if self.time_s is not None and self.time_s < 0:
            raise ContractViolation("time budget must be non-negative")
        if self.iterations is not None and self.iterations < 0:
            raise ContractViolation("iteration budget must be non-negative")

    @property
    def empty(self) -> bool:
        return self.time_s == 0 or self.iterations == 0

    def exhausted(self, elapsed: float, iterations: int) -> bool:
        if self.time_s is not None and elapsed >= self.time_s:
            return True
        return self.iterations is not None and iterations >= self.iterations


def _encode(x: float) -> float | str:
    return x if math.isfinite(x) else "inf"


def _decode(x: Any) -> float:
    return INF if x == "inf" else float(x)


@dataclass
class PlannerResult:
    planner: str
    success: bool
    initial_time_s: float
    initial_cost: float
    final_cost: float
    trace: list[tuple[float, float]]
    counters: dict[str, int]
    path: list[list[float]] = field(default_factory=list)
    iterations: int = 0
    sample_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "planner": self.planner,
            "success": self.success,
            "initial_time_s": _encode(self.initial_time_s),
            "initial_cost": _encode(self.initial_cost),
            "final_cost": _encode(self.final_cost),
            "trace": [[t, c] for t, c in self.trace],
            "counters": dict(self.counters),
            "path": self.path,
            "iterations": self.iterations,
            "sample_digest": self.sample_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "PlannerResult":
        return cls(
            planner=data.get("planner", ""),
            success=bool(data["success"]),
            initial_time_s=_decode(data["initial_time_s"]),
            initial_cost=_decode(data["initial_cost"]),
            final_cost=_decode(data["final_cost"]),
            trace=[(float(t), float(c)) for t, c in data["trace"]],
            counters={k: int(v) for k, v in data["counters"].items()},
            path=data.get("path", []),
            iterations=int(data.get("iterations", 0)),
            sample_digest=data.get("sample_digest", ""),
        )


@dataclass(frozen=True, order=True)
class EdgeQueueEntry:
    key: tuple[float, ...]
    source: int
    target: int


class _EdgeQueue:
    """Priority queue of edges with set semantics: one live key per edge,
    superseded heap items are discarded lazily."""

    def __init__(self) -> None:
        self.heap: list[tuple[tuple[float, ...], int, int, float]] = []
        self.keys: dict[tuple[int, int], tuple[float, ...]] = {}

    def __len__(self) -> int:
        return len(self.keys)

    def push(self, key: tuple[float, ...], s: int, t: int, cost: float) -> bool:
        if self.keys.get((s, t)) == key:
            return False
        self.keys[(s, t)] = key
        heapq.heappush(self.heap, (key, s, t, cost))
        return True

    def _drop_stale(self) -> None:
        heap, keys = self.heap, self.keys
        while heap and keys.get((heap[0][1], heap[0][2])) != heap[0][0]:
            heapq.heappop(heap)

    def min_key(self) -> float:
        self._drop_stale()
        return self.heap[0][0][0] if self.heap else INF

    def pop(self) -> tuple[tuple[float, ...], int, int, float]:
        self._drop_stale()
        if not self.heap:
            raise ContractViolation("pop from an empty edge queue")
        item = heapq.heappop(self.heap)
        del self.keys[(item[1], item[2])]
        return item

    def clear(self) -> None:
        self.heap.clear()
        self.keys.clear()


class FitStar:
    """Batched anytime planner; ``strategy='fixed'`` keeps a constant batch."""

    def __init__(
        self,
        problem: Problem,
        config: PlannerConfig | None = None,
        seed: int | np.random.Generator | None = None,
    ):
        self.problem = problem
        self.config = (config or PlannerConfig()).validate()
        self.world = problem.world
        self.n = self.world.dimension
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.samples = SampleSet(problem.start, problem.goals)
        self.goal_set = frozenset(self.samples.goal_indices)
        self.controller = BatchController(
            self.n, self.config.batch, self.config.strategy, self.config.iteration_budget
        )
        self.dense_res, self.sparse_res = self.config.resolutions(self.world)
        self.c_current = INF
        self.best_path: list[int] = []
        self.best_states: list[np.ndarray] = []
        self.trace: list[tuple[float, float]] = []
        self.counters = {"samples": 0, "sparse_checks": 0, "dense_checks": 0, "batches": 0}
        self.iterations = 0
        self.radius: float | None = None
        self._sparse_ok: dict[tuple[int, int], bool] = {}
        self._dense_ok: dict[tuple[int, int], bool] = {}
        self._digest = hashlib.sha256()
        self._t0 = time.perf_counter()
        self._nbrs: dict[int, tuple[list[int], list[float]]] = {}
        self._tree_adj: dict[int, dict[int, float]] = {}
        self.reverse_restarts = 0
        # per-batch search state, indexed by sample index (INF / -1 = unset)
        self.g_f: list[float] = []
        self.parent_f: list[int] = []
        self.q_f = _EdgeQueue()
        self.h: list[float] = []
        self.effort: list[float] = []
        self.parent_r: list[int] = []
        self.closed_r: set[int] = set()
        self.q_r = _EdgeQueue()
        self._best_rev: list[float] = []
        self._to_start: list[float] = []

    # -- graph primitives -------------------------------------------------

    def neighbors(self, i: int) -> tuple[list[int], list[float]]:
        """RGG neighbours of ``i`` plus its edges in the previous forward tree."""
        cached = self._nbrs.get(i)
        if cached is None:
            idx, d = self.samples.neighbors(i, self.radius)
            cached = (idx.tolist(), d.tolist())
            extra = self._tree_adj.get(i)
            if extra:
                seen = set(cached[0])
                for j, c in extra.items():
                    if j not in seen:
                        cached[0].append(j)
                        cached[1].append(c)
            self._nbrs[i] = cached
        return cached

    def _sparse_valid(self, s: int, t: int) -> bool:
        e = (s, t) if s < t else (t, s)
        ok = self._sparse_ok.get(e)
        if ok is None:
            a, b = self.samples.coords[e[0]], self.samples.coords[e[1]]
            self.counters["sparse_checks"] += interpolation_count(a, b, self.sparse_res)
            ok = motion_valid(a, b, self.world, self.sparse_res)
            self._sparse_ok[e] = ok
        return ok

    def _dense_valid(self, s: int, t: int) -> bool:
        e = (s, t) if s < t else (t, s)
        ok = self._dense_ok.get(e)
        if ok is None:
            a, b = self.samples.coords[e[0]], self.samples.coords[e[1]]
            self.counters["dense_checks"] += interpolation_count(a, b, self.dense_res)
            ok = motion_valid(a, b, self.world, self.dense_res)
            self._dense_ok[e] = ok
        return ok

    def edge_blocked(self, s: int, t: int) -> bool:
        """True once either check has rejected the edge; shared by both searches."""
        e = (s, t) if s < t else (t, s)
        return self._sparse_ok.get(e) is False or self._dense_ok.get(e) is False

    def edge_effort(self, cost: float) -> int:
        """Interpolated checks a sparse validation of an edge of length ``cost`` costs."""
        return int(math.ceil(cost / self.sparse_res)) + 1

    # -- reverse search ---------------------------------------------------

    def restart_reverse(self) -> None:
        size = self.samples.size
        self.h = [INF] * size
        self.effort = [INF] * size
        self.parent_r = [-1] * size
        self._best_rev = [INF] * size
        self.closed_r.clear()
        self.q_r.clear()
        for g in self.samples.goal_indices:
            self.h[g] = 0.0
            self.effort[g] = 0.0
        for g in self.samples.goal_indices:
            self._settle_reverse(g)

    def _settle_reverse(self, t: int) -> None:
        """Queue reverse edges out of ``t`` and forward edges into it.

        Only the best pending reverse edge into each target is queued; the
        alternatives are re-queued if that edge turns out invalid.
        """
        idx, dist = self.neighbors(t)
        h, g_f, best = self.h, self.g_f, self._best_rev
        to_start = self._to_start
        sparse_ok, dense_ok = self._sparse_ok, self._dense_ok
        h_t, e_t = h[t], self.effort[t]
        c_bound = self.c_current
        inv_res = 1.0 / self.sparse_res
        push = self.q_r.push
        for u, c in zip(idx, dist):
            if g_f[u] < INF:
                self._push_forward(u, t, c)
            if h[u] < INF:
                continue
            f = h_t + c + to_start[u]
            if f >= c_bound or f >= best[u]:
                continue
            e = (t, u) if t < u else (u, t)
            if sparse_ok.get(e) is False or dense_ok.get(e) is False:
                continue
            best[u] = f
            push((f, e_t + math.ceil(c * inv_res) + 1), t, u, c)

    def _requeue_reverse_target(self, u: int) -> None:
        h, to_start = self.h, self._to_start
        best = INF
        idx, dist = self.neighbors(u)
        for w, c in zip(idx, dist):
            if h[w] == INF or self.edge_blocked(w, u):
                continue
            f = h[w] + c + to_start[u]
            if f < self.c_current:
                best = min(best, f)
                self.q_r.push((f, self.effort[w] + self.edge_effort(c)), w, u, c)
        self._best_rev[u] = best

    def reverse_iteration(self) -> str:
        key, s, t, c = self.q_r.pop()
        self.closed_r.add(s)
        if self.h[t] < INF:
            return "reverse-stale"
        if self.edge_blocked(s, t) or not self._sparse_valid(s, t):
            self._requeue_reverse_target(t)
            return "reverse-invalid"
        self.h[t] = self.h[s] + c
        self.effort[t] = self.effort[s] + self.edge_effort(c)
        self.parent_r[t] = s
        self._settle_reverse(t)
        self.controller.on_cost_update(self.c_current, self._measure)
        return "reverse-valid"

    # -- forward search ---------------------------------------------------

    def _push_forward(self, s: int, t: int, c: float) -> None:
        h_t = self.h[t]
        if h_t == INF:
            return
        g_s = self.g_f[s]
        g = g_s + c
        if g >= self.g_f[t]:
            return
        f = g + self.config.inflation * h_t
        if f < self.c_current and not self.edge_blocked(s, t):
            self.q_f.push((f, g, g_s), s, t, c)

    def expand(self, i: int) -> list[EdgeQueueEntry]:
        """Queue forward edges out of ``i``; returns the entries, best first."""
        idx, dist = self.neighbors(i)
        parent = self.parent_f[i]
        for t, c in zip(idx, dist):
            if t != parent:
                self._push_forward(i, t, c)
        keys = self.q_f.keys
        out = [EdgeQueueEntry(keys[(i, t)], i, t) for t in idx if (i, t) in keys]
        return sorted(out)

    def forward_iteration(self) -> str:
        key, s, t, c = self.q_f.pop()
        h_t = self.h[t]
        if h_t == INF:
            # reverse search was restarted; the edge is re-queued once t is settled
            return "forward-stale"
        g_s = self.g_f[s]
        g = g_s + c
        fresh = (g + self.config.inflation * h_t, g, g_s)
        if fresh != key:
            self._push_forward(s, t, c)
            return "forward-requeued"
        if g >= self.g_f[t]:
            return "forward-no-improvement"
        if self.parent_f[t] != s:
            if not (self._sparse_valid(s, t) and self._dense_valid(s, t)):
                if self.parent_r[s] == t or self.parent_r[t] == s:
                    self.reverse_restarts += 1
                    self.restart_reverse()
                return "forward-invalid"
        self.g_f[t] = g
        self.parent_f[t] = s
        if t in self.goal_set and g < self.c_current:
            self._record_solution(t)
            event = "forward-solution"
        else:
            event = "forward-improved"
        self.expand(t)
        return event

    def _record_solution(self, goal: int) -> None:
        path = [goal]
        while path[-1] != self.samples.start_index:
            path.append(self.parent_f[path[-1]])
        path.reverse()
        self.c_current = self.g_f[goal]
        self.best_path = path
        self.best_states = [self.samples.coords[i].copy() for i in path]
        self.trace.append((time.perf_counter() - self._t0, self.c_current))

    # -- batches ----------------------------------------------------------

    def _phs_list(self, cost: float):
        out = []
        for g in self.samples.goals:
            if distance(self.samples.start, g) <= cost:
                out.append(phs_from_solution(self.samples.start, g, cost))
        return out

    def _measure(self, cost: float) -> float:
        return float(sum(phs_measure(p) for p in self._phs_list(cost)))

    def _draw(self, count: int) -> np.ndarray:
        """``count`` valid states from the current informed set."""
        bounds = self.world.bounds
        out: list[np.ndarray] = []
        have = 0
        attempts = 0
        limit = 1000 * count + 10_000
        phs = self._phs_list(self.c_current) if math.isfinite(self.c_current) else []
        while have < count and attempts < limit:
            want = count - have
            if not phs:
                cand = sample_uniform_many(bounds, self.rng, want)
            elif len(phs) == 1:
                cand = sample_informed_many(
                    phs[0], bounds, self.rng, want, self.config.informed_attempts
                )
            else:
                cand = self._draw_union(phs, want)
            attempts += want
            cand = cand[self.world.states_valid(cand)]
            out.append(cand)
            have += cand.shape[0]
        states = np.concatenate(out) if out else np.empty((0, self.n))
        return states[:count]

    def _draw_union(self, phs, count: int) -> np.ndarray:
        # uniform on a union of informed sets: pick a member by measure, then
        # keep with probability 1 / (number of members containing the state)
        weights = np.array([phs_measure(p) for p in phs])
        if weights.sum() <= 0:
            weights = np.ones(len(phs))
        choice = self.rng.choice(len(phs), size=count, p=weights / weights.sum())
        rows = []
        for k, p in enumerate(phs):
            m = int(np.count_nonzero(choice == k))
            if m:
                rows.append(
                    sample_informed_many(p, self.world.bounds, self.rng, m, self.config.informed_attempts)
                )
        cand = np.concatenate(rows)
        inside = np.zeros(cand.shape[0])
        for p in phs:
            inside += p.focal_sum(cand) <= p.l_curr
        keep = self.rng.random(cand.shape[0]) * np.maximum(inside, 1) < 1.0
        return cand[keep]

    def _update_radius(self) -> None:
        if self.config.radius is not None:
            self.radius = self.config.radius
            return
        c = self.c_current
        if self.config.radius_count == "informed":
            q = self.samples.count_in_informed(c)
        else:
            q = self.samples.size
        measure = self.world.bounds.measure
        if math.isfinite(c):
            measure = min(measure, self._measure(c))
        if measure <= 0 and self.radius is not None:
            return
        measure = max(measure, 1e-300)
        self.radius = rgg_radius(max(q, 2), measure, self.n, self.config.eta)

    def add_batch(self, states: np.ndarray) -> np.ndarray:
        """Add ``states`` as a new batch and restart both searches."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64)).reshape(-1, self.n)
        idx = self.samples.add(states)
        self._digest.update(np.ascontiguousarray(states).tobytes())
        self.counters["samples"] += states.shape[0]
        self.counters["batches"] += 1
        self._update_radius()
        self._reset_search()
        return idx

    def _keep_tree_edges(self) -> None:
        # The shrinking radius can drop edges of the current tree; keeping
        # them lets every batch start from at least the previous solution.
        alive = self.samples.alive
        adj: dict[int, dict[int, float]] = {}
        coords = self.samples.coords
        for i, p in enumerate(self.parent_f):
            if p >= 0 and alive[i] and alive[p]:
                c = float(row_norms((coords[i] - coords[p])[None, :])[0])
                adj.setdefault(i, {})[p] = c
                adj.setdefault(p, {})[i] = c
        self._tree_adj = adj

    def _reset_search(self) -> None:
        self._keep_tree_edges()
        self._nbrs = {}
        self._to_start = row_norms(self.samples.coords - self.samples.start).tolist()
        size = self.samples.size
        self.g_f = [INF] * size
        self.g_f[self.samples.start_index] = 0.0
        self.parent_f = [-1] * size
        self.q_f.clear()
        self.restart_reverse()
        self.expand(self.samples.start_index)

    def new_batch(self) -> str:
        self.samples.prune_outside(self.c_current)
        self.controller.advance_iteration()
        self.controller.on_cost_update(self.c_current, self._measure)
        self.add_batch(self._draw(self.controller.current_batch))
        return "batch"

    # -- driver -----------------------------------------------------------

    def step(self) -> str:
        self.iterations += 1
        if self.radius is None:
            return self.new_batch()
        rk = self.q_r.min_key()
        fk = self.q_f.min_key()
        if rk < self.c_current and rk <= fk:
            return self.reverse_iteration()
        if fk < self.c_current / self.config.truncation:
            return self.forward_iteration()
        return self.new_batch()

    def exhaust(self, max_steps: int = 10_000_000) -> None:
        """Run the current batch until neither queue can improve the solution."""
        for _ in range(max_steps):
            rk = self.q_r.min_key()
            fk = self.q_f.min_key()
            if rk < self.c_current and rk <= fk:
                self.reverse_iteration()
            elif fk < self.c_current / self.config.truncation:
                self.forward_iteration()
            else:
                return
        raise ContractViolation("search did not terminate")

    def solve(self, budget: Budget) -> PlannerResult:
        self.problem.validate()
        self._t0 = time.perf_counter()
        if budget.empty:
            return self.result()
        while not budget.exhausted(time.perf_counter() - self._t0, self.iterations):
            self.step()
        return self.result()

    def result(self, name: str | None = None) -> PlannerResult:
        success = bool(self.trace)
        return PlannerResult(
            planner=name or self.config.strategy,
            success=success,
            initial_time_s=self.trace[0][0] if success else INF,
            initial_cost=self.trace[0][1] if success else INF,
            final_cost=self.c_current,
            trace=list(self.trace),
            counters=dict(self.counters),
            path=[s.tolist() for s in self.best_states],
            iterations=self.iterations,
            sample_digest=self._digest.hexdigest(),
        )


def solve(
    problem: Problem,
    config: PlannerConfig | None = None,
    stop: Budget | float = 1.0,
    seed: int | np.random.Generator | None = None,
) -> PlannerResult:
    """Plan on ``problem``; ``stop`` is a :class:`Budget` or seconds."""
    budget = stop if isinstance(stop, Budget) else Budget(time_s=float(stop))
    return FitStar(problem, config, seed).solve(budget)


def config_dict(config: PlannerConfig) -> dict:
    return asdict(config)
