"""Exception types shared across the package."""


class PhaseLockError(Exception):
    """Base class for computation errors raised by this package."""


class AmplitudeFloorError(PhaseLockError):
    """Instantaneous amplitude of an estimated source fell below the floor.

    The phase of a near-zero analytic sample is undefined, so evaluation
    stops instead of silently clamping.
    """

    def __init__(self, message, n_samples=None, row=None):
        super().__init__(message)
        self.n_samples = n_samples
        self.row = row


class SingularMatrixError(PhaseLockError):
    """A matrix that must be invertible is singular or numerically so."""


class GradientKinkError(PhaseLockError):
    """Objective is at a non-differentiable point (a column sum near zero)."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class NonFiniteError(PhaseLockError):
    """A NaN or infinity appeared where a finite value is required.

    ``trace`` carries the optimizer trace up to the failing iterate when the
    error comes out of an optimization run; ``step`` carries the step index
    when it comes out of a simulation.
    """

    def __init__(self, message, trace=None, step=None):
        super().__init__(message)
        self.trace = trace
        self.step = step


class CsvFormatError(PhaseLockError):
    """An input CSV file is malformed (ragged or unparseable)."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
