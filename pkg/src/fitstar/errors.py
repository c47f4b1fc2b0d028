"""Exception types raised by the planning library."""


class PlanningError(Exception):
    """Base class for all library errors."""


class ContractViolation(PlanningError, ValueError):
    """An operation was called outside its documented preconditions."""


class InfeasibleCostError(ContractViolation):
    """A solution cost below the straight-line start-goal distance."""


class DegenerateFociError(ContractViolation):
    """Start and goal coincide, so no informed set can be built."""


class RadiusUndefinedError(ContractViolation):
    """The connection radius needs at least two states."""


class SamplingStarvedError(PlanningError, RuntimeError):
    """Rejection sampling ran out of attempts."""


class ConfigError(PlanningError, ValueError):
    """Invalid planner, strategy or run configuration."""


class ScenarioError(PlanningError, ValueError):
    """A scenario could not be generated with the requested parameters."""
