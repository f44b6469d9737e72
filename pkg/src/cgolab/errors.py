"""Exception types shared across the solvers."""


class PreconditionError(ValueError):
    """An input violates a documented precondition."""


class NumericalError(RuntimeError):
    """A solver could not deliver a result within its tolerances."""


class ResonanceError(NumericalError):
    """Too many Fourier modes sit on the zero set of a Faddeev symbol."""


class ContractionError(NumericalError):
    """Fixed-point iteration stopped contracting."""


class DivergenceError(NumericalError):
    """Fixed-point iteration hit its iteration cap."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual
