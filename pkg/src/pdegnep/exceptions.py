"""Exception hierarchy shared by the solvers."""


class SolverError(RuntimeError):
    """Base class for numerical failures."""


class SingularSystemError(SolverError):
    """A linear system could not be factorized or produced non-finite output."""

    def __init__(self, message, *, size=None, residual=None):
        super().__init__(message)
        self.size = size
        self.residual = residual


class LinearSolveError(SolverError):
    """A linear solve finished but missed its residual contract."""

    def __init__(self, message, *, residual=None, bound=None):
        super().__init__(message)
        self.residual = residual
        self.bound = bound


class NewtonFailure(SolverError):
    """Newton's method failed at the last stage of the damping ladder."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PathFailure(SolverError):
    """The path-following loop aborted; ``history`` holds the steps done so far."""

    def __init__(self, message, history=None, report=None):
        super().__init__(message)
        self.history = history
        self.report = report
