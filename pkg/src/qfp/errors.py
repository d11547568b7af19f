"""Exception hierarchy shared by the numerical modules and the CLI."""


class QFPError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QFPError, ValueError):
    """An input violates a precondition (shape, Hermiticity, normalisation...)."""


class NotHermitianError(ValidationError):
    def __init__(self, deviation: float, tol: float):
        self.deviation = deviation
        self.tol = tol
        super().__init__(
            f"matrix is not Hermitian: ||A - A^H||_F = {deviation:.3e} > {tol:.1e}"
        )


class ReducibleGeneratorError(ValidationError):
    def __init__(self, blocks):
        self.blocks = [sorted(b) for b in blocks]
        super().__init__(
            f"generator is reducible; communicating blocks: {self.blocks}"
        )


class NumericalGuardError(QFPError, RuntimeError):
    """A stability, positivity or sampling guard refused the requested run.

    ``suggestion`` carries the smallest admissible value of the offending
    parameter (e.g. a step count) when one can be computed.
    """

    def __init__(self, message: str, suggestion=None):
        self.suggestion = suggestion
        super().__init__(message)


class ConsistencyError(QFPError, RuntimeError):
    """An internal identity failed; indicates a bug rather than bad input."""
