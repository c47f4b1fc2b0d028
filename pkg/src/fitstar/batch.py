"""Adaptive batch sizing.

The number of states drawn per batch follows the contraction of the informed
set: the ratio of the current to the first-solution hypervolume is smoothed by
a sigmoid, compressed by a normalised logarithm into a decay factor in
``[0, 1]``, and mapped linearly onto ``[m_min, m_max]``. Ablation variants
replace the smoothing/compression stage with simpler curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from scipy.optimize import brentq

from .errors import ConfigError, ContractViolation

STRATEGIES = ("fit-sl", "fit-l", "fit-p", "fit-b", "fit-i", "fixed")
DECAY_STRATEGIES = STRATEGIES[:-1]
M_MIN = 1
ITERATION_BUDGET = 100
SIGMOID_STEEPNESS = 10.0


def raw_ratio(v_current: float, v_initial: float) -> float:
    if not (v_current > 0 and v_initial > 0):
        raise ContractViolation("hypervolumes must be positive")
    if v_current > v_initial:
        raise ContractViolation(
            f"current hypervolume {v_current} exceeds the initial {v_initial}"
        )
    return v_current / v_initial


def sigmoid_smooth(xi: float) -> float:
    return 1.0 / (1.0 + math.exp(-SIGMOID_STEEPNESS * (xi - 0.5)))


def decay_factor(o_smooth: float, lam: float) -> float:
    if lam <= 0:
        raise ContractViolation("tuning parameter must be positive")
    return math.log1p(lam * o_smooth) / math.log1p(lam)


def tuning_parameter(m_max: int, m_min: int, n: int) -> float:
    if not m_max > m_min >= 1:
        raise ContractViolation("need m_max > m_min >= 1")
    if n < 2:
        raise ContractViolation("dimension must be at least 2")
    return (m_max + m_min) / n


def batch_value(psi: float, m_min: int, m_max: int) -> float:
    """Unrounded batch size ``m_min + psi * (m_max - m_min)``."""
    return m_min + psi * (m_max - m_min)


def batch_size(psi: float, m_min: int, m_max: int) -> int:
    m = math.floor(batch_value(psi, m_min, m_max) + 0.5)
    return int(min(max(m, m_min), m_max))


def _brachistochrone(xi: float) -> float:
    # cycloid x = (t - sin t)/pi, y = (1 - cos t)/2 joins (0,0) to (1,1) at t = pi
    if xi <= 0.0:
        return 0.0
    if xi >= 1.0:
        return 1.0
    t = brentq(lambda t: (t - math.sin(t)) / math.pi - xi, 0.0, math.pi, xtol=1e-14)
    return (1.0 - math.cos(t)) / 2.0


@dataclass(frozen=True)
class DecayInputs:
    xi: float
    lambda_tuning: float = 100.0
    iteration: int = 0
    iteration_budget: int = ITERATION_BUDGET

    def __post_init__(self) -> None:
        if not (0.0 <= self.xi <= 1.0) or not math.isfinite(self.xi):
            raise ContractViolation(f"raw ratio must lie in [0, 1], got {self.xi}")
        if self.iteration < 0 or self.iteration_budget <= 0:
            raise ContractViolation("iteration counters must be non-negative")

    @property
    def o_smooth(self) -> float:
        return sigmoid_smooth(self.xi)


def decay_variant(strategy: str, inputs: DecayInputs) -> float:
    """Decay factor for ``strategy``.

    Only ``fit-sl`` is the full sigmoid-log chain. The linear, parabola,
    cycloid and iteration-count curves are approximations that share its
    orientation: 0 as the informed set vanishes, 1 at the first solution.
    """
    xi = inputs.xi
    if strategy == "fit-sl":
        return decay_factor(inputs.o_smooth, inputs.lambda_tuning)
    if strategy == "fit-l":
        return xi
    if strategy == "fit-p":
        return xi * xi
    if strategy == "fit-b":
        return _brachistochrone(xi)
    if strategy == "fit-i":
        return max(0.0, 1.0 - inputs.iteration / inputs.iteration_budget)
    raise ConfigError(f"unknown decay strategy {strategy!r}")


def check_strategy(strategy: str) -> str:
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    return strategy


@dataclass
class BatchController:
    """Per-run batch-size state.

    ``current_batch`` starts at ``m_max`` (dense sampling until the first
    solution) for adaptive strategies and stays at ``m_initial`` for
    ``fixed``.
    """

    dimension: int
    m_initial: int = 100
    strategy: str = "fit-sl"
    iteration_budget: int = ITERATION_BUDGET
    m_min: int = M_MIN
    m_max: int = field(init=False)
    lambda_tuning: float = field(init=False)
    c_last: float = math.inf
    v_initial: float | None = None
    v_current: float | None = None
    xi: float = 1.0
    psi: float = 1.0
    current_batch: int = field(init=False)
    iteration: int = 0
    v_initial_writes: int = 0

    def __post_init__(self) -> None:
        check_strategy(self.strategy)
        if self.m_initial < 1:
            raise ConfigError("batch size must be at least 1")
        self.m_max = 2 * self.m_initial - self.m_min
        if self.m_max > self.m_min:
            self.lambda_tuning = tuning_parameter(self.m_max, self.m_min, self.dimension)
        else:
            self.lambda_tuning = float("nan")
        self.current_batch = self.m_initial if self.strategy == "fixed" else self.m_max

    def advance_iteration(self) -> None:
        """Count one finished batch after the first solution.

        ``fit-i`` reads this count at its next cost update.
        """
        if math.isfinite(self.c_last):
            self.iteration += 1

    def on_cost_update(self, c_current: float, measure: Callable[[float], float]) -> int | None:
        """Recompute the batch size after a cost change.

        Returns the new batch size, or ``None`` when nothing changed (no
        solution yet, or the same cost as last time).
        """
        if math.isinf(c_current):
            return None
        if c_current == self.c_last:
            return None
        if c_current > self.c_last:
            raise ContractViolation(f"cost increased from {self.c_last} to {c_current}")
        self.c_last = c_current
        if self.v_initial is None:
            self.v_initial = measure(c_current)
            self.v_initial_writes += 1
        self.v_current = measure(c_current)
        if self.strategy == "fixed" or self.m_max == self.m_min:
            return self.current_batch
        if self.v_initial <= 0.0:
            # first solution was already the straight line; nothing left to contract
            self.xi = 0.0
        else:
            # a vanishing informed set is the xi -> 0+ limit
            v = max(self.v_current, self.v_initial * 1e-300)
            self.xi = raw_ratio(min(v, self.v_initial), self.v_initial)
        self.psi = decay_variant(
            self.strategy,
            DecayInputs(self.xi, self.lambda_tuning, self.iteration, self.iteration_budget),
        )
        self.current_batch = batch_size(self.psi, self.m_min, self.m_max)
        return self.current_batch
