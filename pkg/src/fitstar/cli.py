"""Command-line entry point: ``fitstar plan | bench | gen-env | decay-table | report``.

Exit codes: 0 success, 1 configuration or usage error, 2 the planner ran but
found no solution.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .batch import DECAY_STRATEGIES, STRATEGIES, BatchController, DecayInputs, batch_size, decay_variant
from .bench import (
    PLANNERS,
    PlannerOptions,
    Scenario,
    builtin_scenario,
    check_planners,
    improvement,
    run_planner,
    run_trials,
    summarize,
    trace_filename,
    write_results,
    write_summary,
    write_trace,
)
from .errors import PlanningError
from .search import Budget

log = logging.getLogger("fitstar")

EXIT_OK, EXIT_CONFIG, EXIT_NO_SOLUTION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share the configuration-error exit code
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys provide defaults for these flags")
    p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
    p.add_argument("--master-seed", type=int, default=0, help="master random seed (default: %(default)s)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_planner_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta", type=float, default=1.1, help="RGG radius factor, > 1 (default: %(default)s)")
    p.add_argument("--batch", type=int, default=100, help="initial batch size (default: %(default)s)")
    p.add_argument("--sparse-res", type=float, help="sparse check resolution (default: from world)")
    p.add_argument("--dense-res", type=float, help="dense check resolution (default: from world)")


def _add_scenario(p: argparse.ArgumentParser, repeat: bool) -> None:
    kw = dict(action="append") if repeat else dict(default="wall-gap")
    p.add_argument(
        "--scenario", help="wall-gap, random-rectangles or a scenario JSON file", **kw
    )
    p.add_argument(
        "--dim", type=int, action="append" if repeat else None, default=None if repeat else 2,
        help="dimension of a built-in scenario",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fitstar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fitstar {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("plan", help="run one planner once")
    _add_common(p)
    _add_scenario(p, repeat=False)
    p.add_argument("--planner", default=None, help=f"one of {', '.join(PLANNERS)} (default: fit-sl)")
    p.add_argument("--strategy", choices=STRATEGIES, help="batch strategy of the core planner")
    p.add_argument("--budget", type=float, help="time budget in seconds (default: scenario's)")
    p.add_argument("--instance", type=int, default=0, help="random-rectangles instance seed")
    _add_planner_options(p)

    p = sub.add_parser("bench", help="run a trial matrix and summarise it")
    _add_common(p)
    _add_scenario(p, repeat=True)
    p.add_argument("--planner", action="append", help="planner to include (repeatable)")
    p.add_argument("--seeds", type=int, default=100, help="trials per cell (default: %(default)s)")
    p.add_argument("--budget", type=float, help="time budget per trial (default: scenario's)")
    p.add_argument("--iterations", type=int, help="step cap per trial on top of the time budget")
    p.add_argument("--instances", type=int, default=1, help="random-rectangles instances (seeds 0..k-1)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes (default: cores)")
    _add_planner_options(p)

    p = sub.add_parser("gen-env", help="write a scenario JSON file")
    _add_common(p)
    _add_scenario(p, repeat=False)
    p.add_argument("--instance", type=int, default=0, help="random-rectangles instance seed")
    p.add_argument("--budget", type=float, help="time budget stored in the file")

    p = sub.add_parser("decay-table", help="tabulate decay factor and batch size over the raw ratio")
    _add_common(p)
    p.add_argument("--strategy", action="append", choices=STRATEGIES, help="strategy (repeatable; default: all)")
    p.add_argument("--batch", type=int, default=100, help="initial batch size (default: %(default)s)")
    p.add_argument("--dim", type=int, default=2, help="dimension for the tuning parameter")

    p = sub.add_parser("report", help="render figures from bench output (needs matplotlib)")
    _add_common(p)
    p.add_argument("--results", required=True, help="bench output directory")
    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required: " + ", ".join(("plan", "bench", "gen-env", "decay-table", "report")))
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(defaults, dict):
            raise UsageError("config must be a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = {k.replace("-", "_") for k in defaults} - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)
    return args


# -- helpers -------------------------------------------------------------


def _options(args) -> PlannerOptions:
    return PlannerOptions(
        eta=args.eta, batch=args.batch, dense_resolution=args.dense_res, sparse_resolution=args.sparse_res
    )


def _scenario(name: str, dim: int, instance: int, budget: float | None) -> Scenario:
    if name.endswith(".json") or Path(name).is_file():
        scenario = Scenario.load(name)
        if budget is not None:
            scenario.budget_s = budget
        return scenario
    return builtin_scenario(name, dim, seed=instance, budget_s=budget)


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ------------------------------------------------------------


def cmd_plan(args) -> int:
    planner = args.planner or args.strategy or "fit-sl"
    if args.planner and args.strategy:
        raise UsageError("give either --planner or --strategy")
    check_planners([planner])
    options = _options(args)
    if planner in STRATEGIES:
        options.fit_config(planner)
    else:
        options.rrt_config()
    scenario = _scenario(args.scenario, args.dim, args.instance, None)
    budget = Budget(time_s=scenario.budget_s if args.budget is None else args.budget)
    result = run_planner(planner, scenario.problem(), budget, args.master_seed, options)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(result.to_json() + "\n")
    write_trace(result.trace, out / "trace.csv")
    log.info("%s on %s: cost %s", planner, scenario.name, result.final_cost)
    print(f"{planner} {scenario.name}: success={result.success} cost={result.final_cost:.6g}")
    return EXIT_OK if result.success else EXIT_NO_SOLUTION


def _bench_scenarios(args) -> list[Scenario]:
    names = args.scenario or ["wall-gap"]
    dims = args.dim or [2]
    if args.instances < 1:
        raise UsageError("--instances must be at least 1")
    out = []
    for name in names:
        if name.endswith(".json") or Path(name).is_file():
            out.append(_scenario(name, 0, 0, None))
            continue
        for n in dims:
            seeds = range(args.instances) if name == "random-rectangles" else [0]
            out.extend(builtin_scenario(name, n, seed=s) for s in seeds)
    return out


def cmd_bench(args) -> int:
    planners = check_planners(args.planner or [])
    options = _options(args)
    if any(p in STRATEGIES for p in planners):
        options.fit_config("fit-sl")
    options.rrt_config()
    if args.seeds < 1 or args.jobs < 1:
        raise UsageError("--seeds and --jobs must be at least 1")
    if args.budget is not None and not args.budget > 0:
        raise UsageError("--budget must be positive")
    if args.iterations is not None and args.iterations < 1:
        raise UsageError("--iterations must be at least 1")
    scenarios = _bench_scenarios(args)
    run_config = {
        "planners": planners,
        "scenarios": [s.to_dict() for s in scenarios],
        "seeds": args.seeds,
        "budget": args.budget,
        "iterations": args.iterations,
        "master_seed": args.master_seed,
        "options": options.__dict__,
    }
    config_hash = hashlib.sha256(json.dumps(run_config, sort_keys=True).encode()).hexdigest()
    out = Path(args.out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    log.info("running %d planners x %d scenarios x %d seeds", len(planners), len(scenarios), args.seeds)
    records = run_trials(
        scenarios, planners, args.seeds, args.master_seed, options, args.budget,
        jobs=args.jobs, iterations=args.iterations,
    )
    write_results(records, out / "results.csv")
    for r in records:
        write_trace(r.trace, out / "traces" / trace_filename(r))
    rows = summarize(records)
    write_summary(rows, out / "summary.csv")
    gains = improvement(rows)
    with open(out / "improvement.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "initial_time_improvement_pct"])
        for scenario, pct in gains.items():
            w.writerow([scenario, f"{pct:.2f}"])
    for scenario in dict.fromkeys(s.name for s in scenarios):
        (out / f"{scenario}.json").write_text(
            next(s for s in scenarios if s.name == scenario).to_json() + "\n"
        )
    manifest = {
        "config_hash": config_hash,
        "master_seed": args.master_seed,
        "config": run_config,
        "started_utc": started,
        "versions": {
            "fitstar": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "failures": sum(1 for r in records if r.error),
    }
    _dump(manifest, out / "manifest.json")
    for row in rows:
        print(
            f"{row.scenario:28s} {row.planner:18s} success={row.success_rate:.2f} "
            f"t_med={row.initial_time.median:.4g} c_med={row.initial_cost.median:.4g} "
            f"final_med={row.final_cost.median:.4g}"
        )
    for scenario, pct in gains.items():
        print(f"{scenario}: fit-sl initial-time improvement over fixed {pct:.1f}%")
    return EXIT_OK


def cmd_gen_env(args) -> int:
    scenario = _scenario(args.scenario, args.dim, args.instance, args.budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{scenario.name}.json"
    path.write_text(scenario.to_json() + "\n")
    print(path)
    return EXIT_OK


def decay_rows(strategies, m_initial: int = 100, n: int = 2, steps: int = 100) -> list[dict]:
    """(strategy, xi, psi, batch) over xi = 0, 1/steps, ..., 1.

    The iteration-count strategy has no raw-ratio input; its row reads xi as
    the unused fraction of its iteration budget.
    """
    rows = []
    for strategy in strategies:
        ctl = BatchController(n, m_initial, strategy)
        for k in range(steps + 1):
            xi = k / steps
            if strategy == "fixed":
                psi, m = math.nan, ctl.m_initial
            else:
                iteration = round((1.0 - xi) * ctl.iteration_budget)
                inputs = DecayInputs(xi, ctl.lambda_tuning, iteration, ctl.iteration_budget)
                psi = decay_variant(strategy, inputs)
                m = batch_size(psi, ctl.m_min, ctl.m_max)
            rows.append({"strategy": strategy, "xi": round(xi, 10), "psi": psi, "batch": m})
    return rows


def cmd_decay_table(args) -> int:
    strategies = args.strategy or list(DECAY_STRATEGIES)
    rows = decay_rows(strategies, args.batch, args.dim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "decay_table.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["strategy", "xi", "psi", "batch"])
        w.writeheader()
        w.writerows(rows)
    print(path)
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render

    for path in render(Path(args.results), Path(args.out)):
        print(path)
    return EXIT_OK


COMMANDS = {
    "plan": cmd_plan,
    "bench": cmd_bench,
    "gen-env": cmd_gen_env,
    "decay-table": cmd_decay_table,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"fitstar: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, PlanningError, OSError) as exc:
        print(f"fitstar: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
