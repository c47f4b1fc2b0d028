from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fitstar import Budget, ConfigError, ContractViolation, PlannerResult, ScenarioError
from fitstar.bench import (
    RESULT_COLUMNS,
    PlannerOptions,
    Scenario,
    TrialRecord,
    builtin_scenario,
    cell_seed,
    improvement,
    lower_median,
    make_random_rectangles,
    make_wall_gap,
    median_ci,
    median_ci_ranks,
    read_results,
    replay,
    run_trials,
    summarize,
    write_results,
)
from fitstar.geometry import motion_valid, state_valid

INF = math.inf


class TestWallGap:
    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_straight_line_blocked(self, n):
        sc = make_wall_gap(n)
        assert not motion_valid(sc.start, sc.goals[0], sc.world, 0.001)

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_waypoints_through_gap(self, n):
        sc = make_wall_gap(n)
        # enter and leave the gap on its centre line, 0.1 above the start-goal line
        a = np.r_[0.35, 0.6, np.full(n - 2, 0.5)]
        b = np.r_[0.65, 0.6, np.full(n - 2, 0.5)]
        path = [sc.start, a, b, sc.goals[0]]
        assert all(state_valid(p, sc.world) for p in path)
        assert all(motion_valid(p, q, sc.world, 0.001) for p, q in zip(path[:-1], path[1:]))

    def test_route_over_the_top(self):
        sc = make_wall_gap(2)
        path = [sc.start, np.array([0.4, 0.9]), np.array([0.6, 0.9]), sc.goals[0]]
        assert all(motion_valid(p, q, sc.world, 0.001) for p, q in zip(path[:-1], path[1:]))

    def test_byte_identical(self):
        assert make_wall_gap(4).to_json() == make_wall_gap(4).to_json()

    def test_json_round_trip(self, tmp_path):
        sc = make_wall_gap(2)
        path = tmp_path / "w.json"
        path.write_text(sc.to_json())
        back = Scenario.load(path)
        assert back.to_json() == sc.to_json()

    @pytest.mark.parametrize("bad", [dict(gap_width=0.0), dict(gap_width=0.8), dict(gap_offset=0.35), dict(n=1)])
    def test_degenerate(self, bad):
        with pytest.raises(ScenarioError):
            make_wall_gap(**bad)


class TestRandomRectangles:
    def test_empty(self):
        sc = make_random_rectangles(2, count=0)
        assert sc.world.obstacles == ()
        assert motion_valid(sc.start, sc.goals[0], sc.world, 0.001)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 10**6))
    def test_clearance(self, n, seed):
        sc = make_random_rectangles(n, seed=seed)
        assert len(sc.world.obstacles) == 10 * n
        for box in sc.world.obstacles:
            width = box.max_corner - box.min_corner
            assert np.all(width > 0) and np.all(width <= 0.2)
            for x in (sc.start, sc.goals[0]):
                gap = np.maximum(0, np.maximum(box.min_corner - x, x - box.max_corner))
                assert np.linalg.norm(gap) > 0.05

    def test_deterministic(self):
        a = make_random_rectangles(4, seed=7)
        assert a.to_json() == make_random_rectangles(4, seed=7).to_json()
        assert a.to_json() != make_random_rectangles(4, seed=8).to_json()

    def test_over_constrained(self):
        with pytest.raises(ScenarioError):
            make_random_rectangles(2, count=5, clearance=2.0, max_attempts=100)

    @pytest.mark.parametrize("bad", [dict(count=-1), dict(max_width=0.0), dict(max_width=0.5)])
    def test_invalid(self, bad):
        with pytest.raises(ScenarioError):
            make_random_rectangles(2, **bad)

    def test_builtin(self):
        assert builtin_scenario("random-rectangles", 2, seed=3).to_json() == make_random_rectangles(2, seed=3).to_json()
        with pytest.raises(ScenarioError):
            builtin_scenario("maze", 2)


def timeout_solver(name, problem, budget, seed, options):
    return PlannerResult(
        planner=name, success=False, initial_time_s=INF, initial_cost=INF, final_cost=INF,
        trace=[], counters={"samples": 0, "sparse_checks": 0, "dense_checks": 0, "batches": 0},
    )


def crashing_solver(name, problem, budget, seed, options):
    if name == "fixed":
        raise RuntimeError("boom")
    return timeout_solver(name, problem, budget, seed, options)


class TestTrials:
    SCENARIO = make_wall_gap(2)

    def test_cardinality_and_order(self):
        records = run_trials([self.SCENARIO], ["fit-sl", "fixed"], 3, budget_s=0.02)
        assert len(records) == 6
        assert [r.planner for r in records] == ["fit-sl"] * 3 + ["fixed"] * 3
        assert len({r.seed for r in records}) == 6

    def test_cell_determinism(self):
        opts = dict(budget_s=0.03, master_seed=9)
        a = run_trials([self.SCENARIO], ["fit-sl"], 2, **opts)
        for rec in a:
            again = replay(rec, self.SCENARIO)
            assert [c for _, c in again.trace] == [c for _, c in rec.trace]
            assert again.counters == rec.counters
            assert again.sample_digest == rec.sample_digest

    def test_parallel_matches_serial_seeds(self):
        serial = run_trials([self.SCENARIO], ["fixed", "rrt-connect"], 2, budget_s=0.02)
        parallel = run_trials([self.SCENARIO], ["fixed", "rrt-connect"], 2, budget_s=0.02, jobs=2)
        assert [(r.planner, r.seed) for r in serial] == [(r.planner, r.seed) for r in parallel]

    def test_timeouts(self):
        records = run_trials([self.SCENARIO], ["fit-sl"], 4, solver=timeout_solver)
        row = summarize(records)[0]
        assert row.success_rate == 0.0
        assert row.initial_cost.median == INF and row.final_cost.min == INF

    def test_crash_is_recorded(self):
        records = run_trials([self.SCENARIO], ["fixed", "fit-l"], 2, solver=crashing_solver)
        assert len(records) == 4
        assert all("boom" in r.error for r in records[:2])
        assert all(r.final_cost == INF for r in records)

    def test_bad_matrix(self):
        with pytest.raises(ConfigError):
            run_trials([self.SCENARIO], [], 1)
        with pytest.raises(ConfigError):
            run_trials([self.SCENARIO], ["fit-z"], 1)
        with pytest.raises(ConfigError):
            run_trials([], ["fixed"], 1)

    def test_seed_isolation(self):
        a = cell_seed(0, "fit-sl", "wall-gap-r2", 0)
        assert a == cell_seed(0, "fit-sl", "wall-gap-r2", 0)
        assert len({a, cell_seed(1, "fit-sl", "wall-gap-r2", 0), cell_seed(0, "fixed", "wall-gap-r2", 0),
                    cell_seed(0, "fit-sl", "wall-gap-r4", 0), cell_seed(0, "fit-sl", "wall-gap-r2", 1)}) == 5

    def test_results_csv(self, tmp_path):
        records = run_trials([self.SCENARIO], ["fixed"], 2, solver=timeout_solver)
        write_results(records, tmp_path / "r.csv")
        rows = read_results(tmp_path / "r.csv")
        assert tuple(rows[0]) == RESULT_COLUMNS
        assert rows[0]["final_cost"] == "inf" and rows[0]["success"] == "0"


def record(planner, cost, time=0.1, scenario="s"):
    ok = math.isfinite(cost)
    return TrialRecord(planner, scenario, 2, 0, ok, time if ok else INF, cost, cost, [], {})


class TestSummary:
    def test_lower_median(self):
        assert lower_median([1, 2, 3, INF]) == 2
        assert lower_median([3.0]) == 3.0
        with pytest.raises(ContractViolation):
            lower_median([])

    def test_ci_ranks(self):
        assert median_ci_ranks(1) == (1, 1)
        k = 100
        lo, hi = median_ci_ranks(k)
        assert (lo, hi) == (math.floor((k - 2.576 * 10) / 2), math.ceil((k + 2.576 * 10) / 2) + 1)
        assert (lo, hi) == (37, 64)

    def test_failures_pattern(self):
        recs = [record("a", 1.0 + i / 100) for i in range(97)] + [record("a", INF)] * 3
        row = summarize(recs)[0]
        assert row.success_rate == pytest.approx(0.97)
        assert row.initial_cost.max == INF and math.isfinite(row.initial_cost.median)

    def test_ci_collapses(self):
        row = summarize([record("a", 0.7)] * 20)[0]
        s = row.final_cost
        assert s.min == s.median == s.max == s.ci_low == s.ci_high == 0.7

    def test_empty(self):
        with pytest.raises(ContractViolation):
            summarize([])

    costs = st.lists(st.one_of(st.floats(0.5, 2.0), st.just(INF)), min_size=1, max_size=40)

    @given(costs, st.randoms())
    def test_permutation_invariant(self, values, rnd):
        recs = [record("a", c) for c in values]
        shuffled = list(recs)
        rnd.shuffle(shuffled)
        assert summarize(recs)[0].row() == summarize(shuffled)[0].row()

    @given(costs)
    def test_failure_never_lowers_stats(self, values):
        before = summarize([record("a", c) for c in values])[0]
        after = summarize([record("a", c) for c in values] + [record("a", INF)])[0]
        for part in ("min", "median", "max", "ci_low", "ci_high"):
            assert getattr(after.final_cost, part) >= getattr(before.final_cost, part)
            assert getattr(after.initial_time, part) >= getattr(before.initial_time, part)

    @given(costs)
    def test_order(self, values):
        s = summarize([record("a", c) for c in values])[0].final_cost
        assert s.min <= s.ci_low <= s.median <= s.ci_high <= s.max

    def test_improvement(self):
        recs = [record("fit-sl", 1.0, time=0.075), record("fixed", 1.0, time=0.1)]
        assert improvement(summarize(recs)) == {"s": pytest.approx(25.0)}
        recs = [record("fit-sl", INF), record("fixed", 1.0)]
        assert math.isnan(improvement(summarize(recs))["s"])

    def test_median_ci_values(self):
        lo, hi = median_ci(list(range(1, 101)))
        assert (lo, hi) == (37, 64)


def test_options_validate():
    with pytest.raises(ConfigError):
        PlannerOptions(eta=0.9).fit_config("fit-sl")
    with pytest.raises(ConfigError):
        PlannerOptions(batch=0).fit_config("fixed")
    assert PlannerOptions().fit_config("fit-sl").eta == 1.1
