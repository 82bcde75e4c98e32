"""Exception hierarchy shared by all modules."""


class NormExtError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NormExtError, ValueError):
    """An argument lies outside the interval [0, 1] or another admissible set."""


class SingularityError(NormExtError, ValueError):
    """Evaluation requested too close to a zero of a weight."""


class ShapeError(NormExtError, ValueError):
    """Grid functions or matrices with incompatible shapes."""


class InsufficientResolutionError(NormExtError, ValueError):
    pass


class NotNormalFormError(NormExtError):
    """A_r(t) - alpha'/(2 alpha) I is not constant in t."""


class PositivityError(NormExtError):
    pass


class InvalidExtensionError(NormExtError):
    """Raised by ``extensions.validate``; carries the full report."""

    def __init__(self, report):
        self.report = report
        failed = ", ".join(report.failed()) or "unknown"
        super().__init__(f"invalid extension: failed check(s) {failed}")


class TraceError(NormExtError):
    pass


class DegenerateSpectrumError(NormExtError):
    pass


class SizeError(NormExtError, ValueError):
    pass


class WindowError(NormExtError, ValueError):
    pass


class InverseUndefinedError(NormExtError):
    """0 belongs to the spectrum, so the inverse operator does not exist."""


class FitError(NormExtError, ValueError):
    pass


class ParameterError(NormExtError, ValueError):
    pass


class ResolventSingularityError(NormExtError):
    pass


class ConfigError(NormExtError):
    """Problem configuration could not be parsed; ``where`` names the field or line."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class SemidefiniteWarning(UserWarning):
    """C is positive semidefinite but singular; modules that invert it will refuse it."""
