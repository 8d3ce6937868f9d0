"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before meeting its tolerance.

    The last iterate and the residual reached are kept on the exception so a
    caller can inspect how far the solver got.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
