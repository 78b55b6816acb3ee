"""Exception hierarchy shared by all pmorkit modules."""


class PmorError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PmorError, ValueError):
    """Raised for non-finite data, out-of-range orders, bad weights and similar."""


class SingularSystemError(PmorError):
    """A linear system is singular to working precision."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class RankDeficiencyError(PmorError):
    def __init__(self, message, rank):
        super().__init__(f"{message} (numerical rank {rank})")
        self.rank = rank


class DegenerateGeometryError(PmorError):
    """Collapsed segment or self-intersecting chamber polygon."""


class NonConvergenceError(PmorError):
    """Newton iteration exceeded its budget.

    Attributes
    ----------
    history : list of dict
        Per-iteration residual and increment norms.
    step : int or None
        Index of the failing time step, filled in by the trajectory driver.
    """

    def __init__(self, message, history=None, step=None):
        super().__init__(message)
        self.history = list(history or [])
        self.step = step


class ExtrapolationError(InvalidInputError):
    """Query parameter lies outside the sampled interval."""


class TangentMapError(PmorError):
    """Grassmann logarithm undefined: subspaces are (nearly) orthogonal."""

    def __init__(self, message, sample):
        super().__init__(message)
        self.sample = sample


class IncompatibleTrajectoriesError(InvalidInputError):
    pass


class ForwardModelError(PmorError):
    """A forward evaluation failed inside the inverse analysis."""

    def __init__(self, message, mu):
        super().__init__(f"{message} at mu={list(mu)}")
        self.mu = list(mu)


class ColumnFailureError(ForwardModelError):
    def __init__(self, message, mu, column):
        super().__init__(f"{message} (Jacobian column {column})", mu)
        self.column = column
