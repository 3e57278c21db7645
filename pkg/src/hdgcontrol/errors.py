"""Exception types shared across the solver."""


class StabilizationError(RuntimeError):
    """The stabilization functions violate the positivity condition."""


class LocalSingularityError(RuntimeError):
    """An element-local system is numerically singular."""

    def __init__(self, elem: int, rcond: float):
        super().__init__(
            f"local system on element {elem} is numerically singular "
            f"(reciprocal condition estimate {rcond:.3e})"
        )
        self.elem = elem
        self.rcond = rcond


class SolverError(RuntimeError):
    """The global trace solve failed or left a large residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """Invalid study configuration."""
