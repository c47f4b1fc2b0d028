"""Anytime sampling-based path planning with adaptive batch sizes."""

from .errors import (
    ConfigError,
    ContractViolation,
    DegenerateFociError,
    InfeasibleCostError,
    PlanningError,
    RadiusUndefinedError,
    SamplingStarvedError,
    ScenarioError,
)
from .geometry import (
    AxisAlignedBox,
    Bounds,
    ProlateHyperspheroid,
    World,
    distance,
    motion_valid,
    phs_from_solution,
    phs_measure,
    sample_informed,
    sample_uniform,
    state_valid,
    unit_ball_measure,
)
from .search import Budget, FitStar, PlannerConfig, PlannerResult, Problem, solve

__version__ = "0.1.0"

__all__ = [
    "AxisAlignedBox",
    "Bounds",
    "Budget",
    "ConfigError",
    "ContractViolation",
    "DegenerateFociError",
    "FitStar",
    "InfeasibleCostError",
    "PlannerConfig",
    "PlannerResult",
    "PlanningError",
    "Problem",
    "ProlateHyperspheroid",
    "RadiusUndefinedError",
    "SamplingStarvedError",
    "ScenarioError",
    "World",
    "distance",
    "motion_valid",
    "phs_from_solution",
    "phs_measure",
    "sample_informed",
    "sample_uniform",
    "solve",
    "state_valid",
    "unit_ball_measure",
]
