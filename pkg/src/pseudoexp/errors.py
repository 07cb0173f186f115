"""Exception types shared across the package."""


class NoSolutionError(ValueError):
    """A linear matrix equation has no solution (inconsistent singular system).

    Carries the least-squares residual of the best attainable fit in
    ``residual``.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = float(residual)


class ConstructionError(ValueError):
    """Scenario data violates the constraints the construction needs."""


class ConfigError(ValueError):
    """A run configuration is malformed or fails schema validation."""
