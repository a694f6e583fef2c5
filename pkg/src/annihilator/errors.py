"""Exception hierarchy shared by all solver stages."""


class AnnihilatorError(Exception):
    """Base class for every error raised by this package."""


class DomainError(AnnihilatorError, ValueError):
    """An argument lies outside the domain where it is defined."""


class AccuracyError(AnnihilatorError):
    """Quadrature could not reach the requested tolerance.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether it is good enough.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SolverFailure(AnnihilatorError):
    """A nonlinear solve did not reach its tolerance.

    ``best`` holds the best candidate found (partition, phase, ...) and
    ``diagnostics`` a free-form dict for reporting.
    """

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = dict(diagnostics or {})


class BasisFailure(SolverFailure):
    """No non-singular bump basis was found (independence precondition violated)."""


class CorrectorFailure(SolverFailure):
    """Newton correction of the mollified phase did not converge."""


class SchemaError(AnnihilatorError, ValueError):
    """A problem file does not match the expected schema."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
