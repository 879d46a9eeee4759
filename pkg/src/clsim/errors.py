"""Exception types shared across the package."""


class ClsimError(Exception):
    """Base class for all clsim errors."""


class GeometryError(ClsimError):
    """Task geometry is malformed or not realizable in Euclidean space."""


class DimensionError(ClsimError):
    """Ambient dimension too small to realize the requested geometry."""

    def __init__(self, message: str, min_dimension: int):
        super().__init__(message)
        self.min_dimension = min_dimension


class InvalidConfigError(ClsimError):
    """A configuration violates its preconditions."""


class CapacityError(ClsimError):
    """Rehearsal quota exceeds the samples stored for a task."""


class BoundaryStepError(ClsimError):
    """A training step would run at the interpolation boundary |m - p| <= 1."""


class RankDeficiencyError(ClsimError):
    """Gram matrix numerically singular during a fit."""

    def __init__(self, message: str, condition_estimate: float):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class BoundaryRegimeError(ClsimError):
    """Closed-form expectations are undefined at the interpolation boundary."""


class UndefinedMetricError(ClsimError):
    """Metric is undefined for the requested task index (memory needs t >= 2)."""


class RangeError(ClsimError):
    """An extremum scan was requested over an empty range."""


class EmptySweepError(ClsimError):
    """Every sweep value was skipped; nothing to aggregate."""


class ReplicationError(ClsimError):
    """A Monte Carlo replication failed; carries the failing index."""

    def __init__(self, message: str, replication_index: int):
        super().__init__(message)
        self.replication_index = replication_index
