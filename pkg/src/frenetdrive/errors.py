"""Exception types shared across the planning stack."""


class PlanningError(Exception):
    """Base class for all errors raised by frenetdrive."""


class HorizonError(PlanningError, ValueError):
    """Non-positive, non-finite or degenerate time horizon."""


class InputError(PlanningError, ValueError):
    """Non-finite or otherwise invalid numeric input."""


class DomainError(PlanningError, ValueError):
    """Evaluation outside the valid domain of a function."""


class DegenerateInputError(PlanningError, ValueError):
    """Geometry that cannot define a curve (e.g. duplicate waypoints)."""


class ConversionError(PlanningError):
    """Frenet/Cartesian conversion is undefined for the given state."""


class FrenetRangeError(PlanningError):
    """Pose lies outside the projection corridor of a reference line."""


class NoFeasibleTrajectory(PlanningError):
    """No candidate survived feasibility and collision filtering.

    ``n_candidates`` and ``n_collision_free`` carry the counts of the tick
    that failed so callers can still log them.
    """

    def __init__(self, message="no feasible trajectory", n_candidates=0, n_collision_free=0):
        super().__init__(message)
        self.n_candidates = n_candidates
        self.n_collision_free = n_collision_free


class ScenarioError(PlanningError, ValueError):
    """Malformed map, scenario, config or manifest file."""
