"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class AccuracyError(RuntimeError):
    """A numerical procedure ran out of budget before reaching its tolerance.

    The best estimate and its error bound are kept so callers can decide
    whether the result is still usable.
    """

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class GeometryError(ValueError):
    """Invalid polygon or unit-cell geometry."""


class ContactError(GeometryError):
    """The two bodies overlap or touch at the requested displacement."""


class GeometryParseError(GeometryError):
    """Malformed geometry file."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class SolverError(RuntimeError):
    """The electrostatic solver did not converge."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class FitError(RuntimeError):
    """A least-squares fit could not be performed."""
