"""Figures from bench output: median cost and success rate over time per
scenario, plus decay curves when a decay table is present."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .bench import lower_median, median_ci

PARAMS = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "lines.linewidth": 1.2,
    "figure.figsize": (7.0, 2.8),
    "figure.dpi": 150,
}


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _trace(path: Path) -> list[tuple[float, float]]:
    return [(float(r["t_s"]), float(r["cost"])) for r in _read(path)]


def cost_at(trace: list[tuple[float, float]], times: np.ndarray) -> np.ndarray:
    """Best cost reached by each time in ``times`` (infinite before the first solution)."""
    out = np.full(times.shape, math.inf)
    for t, c in trace:
        out[times >= t] = np.minimum(out[times >= t], c)
    return out


def render(results: Path, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(PARAMS)
    out.mkdir(parents=True, exist_ok=True)
    rows = _read(results / "results.csv")
    written = []
    for scenario in dict.fromkeys(r["scenario"] for r in rows):
        sub = [r for r in rows if r["scenario"] == scenario]
        traces = {}
        for r in sub:
            name = f"{r['planner']}__{scenario}__{r['seed']}.csv"
            traces.setdefault(r["planner"], []).append(_trace(results / "traces" / name))
        horizon = max((t for ts in traces.values() for tr in ts for t, _ in tr), default=1.0)
        times = np.linspace(0.0, horizon * 1.05, 200)[1:]
        fig, (ax_c, ax_s) = plt.subplots(1, 2)
        for planner, ts in traces.items():
            costs = np.stack([cost_at(tr, times) for tr in ts])
            med = np.array([lower_median(col.tolist()) for col in costs.T])
            lo, hi = zip(*(median_ci(col.tolist()) for col in costs.T))
            line, = ax_c.plot(times, np.where(np.isfinite(med), med, np.nan), label=planner)
            ax_c.fill_between(
                times,
                np.where(np.isfinite(lo), lo, np.nan),
                np.where(np.isfinite(hi), hi, np.nan),
                color=line.get_color(),
                alpha=0.15,
                linewidth=0,
            )
            ax_s.plot(times, np.mean(np.isfinite(costs), axis=0), color=line.get_color())
        ax_c.set_xlabel("time [s]")
        ax_c.set_ylabel("median cost (99% CI)")
        ax_c.legend(frameon=False)
        ax_s.set_xlabel("time [s]")
        ax_s.set_ylabel("success rate")
        ax_s.set_ylim(-0.02, 1.02)
        fig.suptitle(scenario)
        fig.tight_layout()
        path = out / f"{scenario}.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    table = results / "decay_table.csv"
    if table.exists():
        rows = _read(table)
        fig, (ax_p, ax_m) = plt.subplots(1, 2)
        for strategy in dict.fromkeys(r["strategy"] for r in rows):
            sub = [r for r in rows if r["strategy"] == strategy]
            xi = [float(r["xi"]) for r in sub]
            ax_p.plot(xi, [float(r["psi"]) for r in sub], label=strategy)
            ax_m.plot(xi, [int(r["batch"]) for r in sub], label=strategy)
        ax_p.set_xlabel("raw ratio")
        ax_p.set_ylabel("decay factor")
        ax_m.set_xlabel("raw ratio")
        ax_m.set_ylabel("batch size")
        ax_p.legend(frameon=False)
        fig.tight_layout()
        path = out / "decay.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written
