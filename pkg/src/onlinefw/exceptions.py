"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """An array or atom is incompatible with the expected shape."""


class NoDataError(ValueError):
    """A gradient was requested before any sample was observed."""


class StepBoundError(ValueError):
    """A step size violates its feasibility bound (e.g. away step past gamma_max)."""


class UnsupportedConstraintError(TypeError):
    """The requested solver cannot operate on this constraint set."""
