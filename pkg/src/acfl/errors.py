"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument or configuration value violates a documented precondition."""


class NumericError(ArithmeticError):
    """A numerical routine failed (non-SPD matrix, singular system, ...)."""

    def __init__(self, message: str, *, pivot_index: int | None = None):
        super().__init__(message)
        # For Cholesky breakdowns: 1-based order of the offending leading minor.
        self.pivot_index = pivot_index
