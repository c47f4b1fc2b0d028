"""Benchmark scenarios, the seeded trial runner and order-statistic summaries."""

from __future__ import annotations

import csv
import json
import math
import traceback
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import RrtConfig, informed_rrt_star_solve, rrt_connect_solve
from .batch import STRATEGIES
from .errors import ConfigError, ContractViolation, ScenarioError
from .geometry import AxisAlignedBox, Bounds, World, state_valid
from .search import INF, Budget, PlannerConfig, PlannerResult, Problem, solve

WALL_GAP_BUDGETS = {2: 0.2, 4: 0.5, 8: 1.0}
RANDOM_RECTANGLES_BUDGETS = {2: 2.5, 4: 6.0, 8: 15.0}
PLANNERS = STRATEGIES + ("rrt-connect", "informed-rrt-star")
CI_Z = 2.576
RESULT_COLUMNS = (
    "planner",
    "scenario",
    "dimension",
    "seed",
    "success",
    "initial_time_s",
    "initial_cost",
    "final_cost",
    "n_samples",
    "n_sparse_checks",
    "n_dense_checks",
    "n_batches",
)


# -- scenarios -----------------------------------------------------------


@dataclass
class Scenario:
    name: str
    world: World
    start: np.ndarray
    goals: list[np.ndarray]
    budget_s: float
    kind: str = "custom-world-file"
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.budget_s > 0:
            raise ScenarioError("scenario budget must be positive")
        self.start = np.asarray(self.start, dtype=np.float64)
        self.goals = [np.asarray(g, dtype=np.float64) for g in self.goals]
        for x in [self.start, *self.goals]:
            if x.shape != (self.world.dimension,) or not state_valid(x, self.world):
                raise ScenarioError(f"terminal state {x.tolist()} is not valid in the world")

    @property
    def dimension(self) -> int:
        return self.world.dimension

    def problem(self) -> Problem:
        return Problem(self.world, self.start, self.goals)

    def to_dict(self) -> dict:
        data = self.world.to_dict()
        data.update(
            name=self.name,
            kind=self.kind,
            params=self.params,
            start=self.start.tolist(),
            goals=[g.tolist() for g in self.goals],
            budget=self.budget_s,
        )
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, name: str | None = None) -> "Scenario":
        try:
            world = World.from_dict(data)
            return cls(
                name=name or data.get("name", "custom"),
                world=world,
                start=data["start"],
                goals=data["goals"],
                budget_s=float(data["budget"]),
                kind=data.get("kind", "custom-world-file"),
                params=data.get("params", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_dict(data, name=data.get("name", Path(path).stem))


def _terminal(value: float | Sequence[float], n: int) -> np.ndarray:
    if np.isscalar(value):
        return np.full(n, float(value))
    out = np.asarray(value, dtype=np.float64)
    if out.shape != (n,):
        raise ScenarioError(f"terminal state must have {n} coordinates")
    return out


def make_wall_gap(
    n: int = 2,
    *,
    wall_center: float = 0.5,
    thickness: float = 0.2,
    gap_width: float = 0.04,
    gap_offset: float = 0.1,
    top_opening: float = 0.2,
    start: float | Sequence[float] = (0.2, 0.5),
    goal: float | Sequence[float] = (0.8, 0.5),
    budget_s: float | None = None,
) -> Scenario:
    """A wall across the first axis with a narrow gap and an open top.

    The wall occupies ``wall_center +- thickness/2`` along the first axis and
    ``[0, 1 - top_opening]`` along the second, minus a gap of ``gap_width``
    centred ``gap_offset`` above the start-goal line. Paths therefore either
    thread the gap or go round the top end of the wall. Remaining axes are
    spanned in full.
    """
    if n < 2:
        raise ScenarioError("wall gap needs n >= 2")
    wall_top = 1.0 - top_opening
    if not (0 < thickness < 1) or not (0 <= top_opening < 1):
        raise ScenarioError("wall thickness and opening must lie in (0, 1)")
    if not gap_width > 0 or gap_width >= wall_top:
        raise ScenarioError(f"gap width {gap_width} must be positive and below the wall extent {wall_top}")
    gap_lo = 0.5 + gap_offset - gap_width / 2
    gap_hi = gap_lo + gap_width
    if gap_lo <= 0 or gap_hi >= wall_top:
        raise ScenarioError("gap does not lie inside the wall")

    def terminal(v):
        if isinstance(v, (tuple, list)) and len(v) == 2 and n > 2:
            v = list(v) + [0.5] * (n - 2)
        return _terminal(v, n)

    x_lo, x_hi = wall_center - thickness / 2, wall_center + thickness / 2
    lower = np.zeros(n)
    upper = np.ones(n)
    below = AxisAlignedBox(
        np.r_[x_lo, 0.0, lower[2:]], np.r_[x_hi, gap_lo, upper[2:]]
    )
    above = AxisAlignedBox(
        np.r_[x_lo, gap_hi, lower[2:]], np.r_[x_hi, wall_top, upper[2:]]
    )
    world = World(Bounds.unit(n), (below, above))
    params = dict(
        wall_center=wall_center,
        thickness=thickness,
        gap_width=gap_width,
        gap_offset=gap_offset,
        top_opening=top_opening,
    )
    return Scenario(
        name=f"wall-gap-r{n}",
        world=world,
        start=terminal(start),
        goals=[terminal(goal)],
        budget_s=budget_s if budget_s is not None else WALL_GAP_BUDGETS.get(n, 0.2 * n / 2),
        kind="wall-gap",
        params=params,
    )


def _box_ball_distance(lo: np.ndarray, hi: np.ndarray, x: np.ndarray) -> float:
    return float(np.linalg.norm(np.maximum(0.0, np.maximum(lo - x, x - hi))))


def make_random_rectangles(
    n: int = 2,
    count: int | None = None,
    max_width: float = 0.2,
    seed: int = 0,
    *,
    clearance: float = 0.05,
    start: float | Sequence[float] = 0.1,
    goal: float | Sequence[float] = 0.9,
    max_attempts: int = 100_000,
    budget_s: float | None = None,
) -> Scenario:
    """``count`` random axis-aligned boxes kept clear of the start and goal."""
    if n < 2:
        raise ScenarioError("random rectangles need n >= 2")
    count = 10 * n if count is None else count
    if count < 0:
        raise ScenarioError("obstacle count must be non-negative")
    if not 0 < max_width < 0.5:
        raise ScenarioError("max_width must lie in (0, 0.5)")
    s, g = _terminal(start, n), _terminal(goal, n)
    rng = np.random.default_rng(seed)
    boxes: list[AxisAlignedBox] = []
    attempts = 0
    while len(boxes) < count:
        if attempts >= max_attempts:
            raise ScenarioError(f"placed {len(boxes)} of {count} obstacles in {max_attempts} attempts")
        attempts += 1
        width = max_width * (1.0 - rng.random(n))  # (0, max_width]
        center = rng.random(n)
        lo, hi = center - width / 2, center + width / 2
        if min(_box_ball_distance(lo, hi, s), _box_ball_distance(lo, hi, g)) <= clearance:
            continue
        boxes.append(AxisAlignedBox(lo, hi))
    return Scenario(
        name=f"random-rectangles-r{n}-s{seed}",
        world=World(Bounds.unit(n), tuple(boxes)),
        start=s,
        goals=[g],
        budget_s=budget_s if budget_s is not None else RANDOM_RECTANGLES_BUDGETS.get(n, 2.5 * n / 2),
        kind="random-rectangles",
        params=dict(count=count, max_width=max_width, seed=seed, clearance=clearance),
    )


def builtin_scenario(name: str, n: int, seed: int = 0, budget_s: float | None = None) -> Scenario:
    if name == "wall-gap":
        return make_wall_gap(n, budget_s=budget_s)
    if name == "random-rectangles":
        return make_random_rectangles(n, seed=seed, budget_s=budget_s)
    raise ScenarioError(f"unknown scenario {name!r}; use wall-gap, random-rectangles or a JSON file")


# -- planners ------------------------------------------------------------


@dataclass(frozen=True)
class PlannerOptions:
    """Options shared by every planner in a matrix; ``None`` keeps defaults."""

    eta: float = 1.1
    batch: int = 100
    dense_resolution: float | None = None
    sparse_resolution: float | None = None

    def fit_config(self, strategy: str) -> PlannerConfig:
        return PlannerConfig(
            strategy=strategy,
            eta=self.eta,
            batch=self.batch,
            dense_resolution=self.dense_resolution,
            sparse_resolution=self.sparse_resolution,
        ).validate()

    def rrt_config(self) -> RrtConfig:
        return RrtConfig(eta=self.eta, resolution=self.dense_resolution).validate()


def check_planners(names: Iterable[str]) -> list[str]:
    names = list(names)
    if not names:
        raise ConfigError("no planners given")
    for name in names:
        if name not in PLANNERS:
            raise ConfigError(f"unknown planner {name!r}; choose from {', '.join(PLANNERS)}")
    return names


def run_planner(
    name: str,
    problem: Problem,
    budget: Budget,
    seed,
    options: PlannerOptions | None = None,
) -> PlannerResult:
    options = options or PlannerOptions()
    if name == "rrt-connect":
        result = rrt_connect_solve(problem, options.rrt_config(), budget, seed)
    elif name == "informed-rrt-star":
        result = informed_rrt_star_solve(problem, options.rrt_config(), budget, seed)
    elif name in STRATEGIES:
        result = solve(problem, options.fit_config(name), budget, seed)
    else:
        raise ConfigError(f"unknown planner {name!r}")
    result.planner = name
    return result


# -- trials --------------------------------------------------------------


def cell_seed(master_seed: int, planner: str, scenario: str, trial: int) -> int:
    """Seed of one trial cell, independent of every other cell."""
    seq = np.random.SeedSequence(
        [master_seed, zlib.crc32(planner.encode()), zlib.crc32(scenario.encode()), trial]
    )
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass
class TrialRecord:
    planner: str
    scenario: str
    dimension: int
    seed: int
    success: bool
    initial_time_s: float
    initial_cost: float
    final_cost: float
    trace: list[tuple[float, float]]
    counters: dict[str, int]
    iterations: int = 0
    sample_digest: str = ""
    path: list[list[float]] = field(default_factory=list)
    error: str = ""

    def row(self) -> dict:
        c = self.counters
        return {
            "planner": self.planner,
            "scenario": self.scenario,
            "dimension": self.dimension,
            "seed": self.seed,
            "success": int(self.success),
            "initial_time_s": self.initial_time_s,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "n_samples": c.get("samples", 0),
            "n_sparse_checks": c.get("sparse_checks", 0),
            "n_dense_checks": c.get("dense_checks", 0),
            "n_batches": c.get("batches", 0),
        }


@dataclass(frozen=True)
class TrialCell:
    index: int
    planner: str
    scenario: Scenario
    trial: int
    master_seed: int
    options: PlannerOptions
    budget: Budget


def _failed(cell: TrialCell, seed: int, error: str) -> TrialRecord:
    return TrialRecord(
        planner=cell.planner,
        scenario=cell.scenario.name,
        dimension=cell.scenario.dimension,
        seed=seed,
        success=False,
        initial_time_s=INF,
        initial_cost=INF,
        final_cost=INF,
        trace=[],
        counters={},
        error=error,
    )


def run_cell(cell: TrialCell, solver: Callable = run_planner) -> TrialRecord:
    seed = cell_seed(cell.master_seed, cell.planner, cell.scenario.name, cell.trial)
    try:
        r = solver(cell.planner, cell.scenario.problem(), cell.budget, seed, cell.options)
    except Exception:  # a crashing trial is recorded, never fatal to the matrix
        return _failed(cell, seed, traceback.format_exc(limit=3))
    return TrialRecord(
        planner=cell.planner,
        scenario=cell.scenario.name,
        dimension=cell.scenario.dimension,
        seed=seed,
        success=r.success,
        initial_time_s=r.initial_time_s,
        initial_cost=r.initial_cost,
        final_cost=r.final_cost if r.success else INF,
        trace=r.trace,
        counters=r.counters,
        iterations=r.iterations,
        sample_digest=r.sample_digest,
        path=r.path,
    )


def trial_cells(
    scenarios: Sequence[Scenario],
    planners: Sequence[str],
    seeds: int,
    master_seed: int = 0,
    options: PlannerOptions | None = None,
    budget_s: float | None = None,
    iterations: int | None = None,
) -> list[TrialCell]:
    """Cells in (scenario, planner, trial) order. ``iterations`` adds a step
    cap to every cell's time budget, which makes whole records reproducible."""
    check_planners(planners)
    if not scenarios or seeds < 1:
        raise ConfigError("the trial matrix is empty")
    options = options or PlannerOptions()
    cells = []
    for scenario in scenarios:
        budget = Budget(
            time_s=budget_s if budget_s is not None else scenario.budget_s, iterations=iterations
        )
        for planner in planners:
            for trial in range(seeds):
                cells.append(
                    TrialCell(len(cells), planner, scenario, trial, master_seed, options, budget)
                )
    return cells


def run_trials(
    scenarios: Sequence[Scenario],
    planners: Sequence[str],
    seeds: int,
    master_seed: int = 0,
    options: PlannerOptions | None = None,
    budget_s: float | None = None,
    jobs: int = 1,
    solver: Callable = run_planner,
    iterations: int | None = None,
) -> list[TrialRecord]:
    """Run every (scenario, planner, trial) cell; records come back in cell order."""
    cells = trial_cells(scenarios, planners, seeds, master_seed, options, budget_s, iterations)
    if jobs <= 1 or len(cells) == 1:
        return [run_cell(c, solver) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_cell, cells, [solver] * len(cells)))


def replay(record: TrialRecord, scenario: Scenario, options: PlannerOptions | None = None) -> PlannerResult:
    """Re-run a recorded trial for exactly as many search iterations."""
    return run_planner(
        record.planner,
        scenario.problem(),
        Budget(iterations=record.iterations),
        record.seed,
        options,
    )


# -- summaries -----------------------------------------------------------


def lower_median(values: Sequence[float]) -> float:
    if not values:
        raise ContractViolation("median of an empty sample")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def median_ci_ranks(k: int, z: float = CI_Z) -> tuple[int, int]:
    """1-based order-statistic ranks bounding the median of ``k`` values."""
    lo = math.floor((k - z * math.sqrt(k)) / 2)
    hi = math.ceil((k + z * math.sqrt(k)) / 2) + 1
    return min(max(lo, 1), k), min(max(hi, 1), k)


def median_ci(values: Sequence[float], z: float = CI_Z) -> tuple[float, float]:
    ordered = sorted(values)
    lo, hi = median_ci_ranks(len(ordered), z)
    return ordered[lo - 1], ordered[hi - 1]


@dataclass
class Stat:
    min: float
    median: float
    max: float
    ci_low: float
    ci_high: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Stat":
        ordered = sorted(values)
        lo, hi = median_ci(ordered)
        return cls(ordered[0], lower_median(ordered), ordered[-1], lo, hi)


@dataclass
class SummaryRow:
    planner: str
    scenario: str
    runs: int
    success_rate: float
    initial_time: Stat
    initial_cost: Stat
    final_cost: Stat

    def row(self) -> dict:
        out = {
            "planner": self.planner,
            "scenario": self.scenario,
            "runs": self.runs,
            "success_rate": self.success_rate,
        }
        for label, stat in (
            ("t_init", self.initial_time),
            ("c_init", self.initial_cost),
            ("c_final", self.final_cost),
        ):
            for part in ("min", "median", "max", "ci_low", "ci_high"):
                out[f"{label}_{part}"] = getattr(stat, part)
        return out


def summarize(records: Sequence[TrialRecord]) -> list[SummaryRow]:
    """One row per (scenario, planner), in order of first appearance.

    Failed runs count as infinite time and cost, so they sort last.
    """
    if not records:
        raise ContractViolation("no records to summarize")
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.scenario, r.planner), []).append(r)
    rows = []
    for (scenario, planner), group in groups.items():
        rows.append(
            SummaryRow(
                planner=planner,
                scenario=scenario,
                runs=len(group),
                success_rate=sum(r.success for r in group) / len(group),
                initial_time=Stat.of([r.initial_time_s if r.success else INF for r in group]),
                initial_cost=Stat.of([r.initial_cost if r.success else INF for r in group]),
                final_cost=Stat.of([r.final_cost if r.success else INF for r in group]),
            )
        )
    return rows


def improvement(rows: Sequence[SummaryRow], planner: str = "fit-sl", reference: str = "fixed") -> dict[str, float]:
    """Percentage reduction in median initial time of ``planner`` against
    ``reference`` per scenario (negative when slower, NaN when undefined)."""
    by_key = {(r.scenario, r.planner): r for r in rows}
    out = {}
    for scenario in dict.fromkeys(r.scenario for r in rows):
        a, b = by_key.get((scenario, planner)), by_key.get((scenario, reference))
        if a is None or b is None:
            continue
        ta, tb = a.initial_time.median, b.initial_time.median
        if math.isfinite(ta) and math.isfinite(tb) and tb > 0:
            out[scenario] = 100.0 * (1.0 - ta / tb)
        else:
            out[scenario] = math.nan
    return out


# -- files ---------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


def write_results(records: Sequence[TrialRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(v) for k, v in r.row().items()})


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_trace(trace: Sequence[tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "cost"])
        for t, c in trace:
            w.writerow([repr(float(t)), repr(float(c))])


def trace_filename(record: TrialRecord) -> str:
    return f"{record.planner}__{record.scenario}__{record.seed}.csv"


def write_summary(rows: Sequence[SummaryRow], path: str | Path) -> None:
    if not rows:
        raise ContractViolation("no summary rows")
    dicts = [r.row() for r in rows]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(dicts[0]))
        w.writeheader()
        for d in dicts:
            w.writerow({k: _fmt(v) for k, v in d.items()})
