"""Exception types shared across the package."""


class DrifthomError(Exception):
    """Base class for all package errors."""


class DomainError(DrifthomError, ValueError):
    """Parameters fall outside the admissible range of a closed-form map."""


class SingularSystem(DrifthomError, ArithmeticError):
    def __init__(self, message, condition=float("nan")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class ArgumentError(DrifthomError, ValueError):
    pass


class GradingError(DrifthomError, ValueError):
    pass


class PairingError(DrifthomError, ValueError):
    pass


class ResolutionError(DrifthomError, ValueError):
    pass


class MeshError(DrifthomError, ValueError):
    """A mesh failed one of the validity checks."""


class NotConverged(DrifthomError, RuntimeError):
    """An iterative solve stopped before reaching its tolerance.

    ``x`` holds the best iterate and ``report`` the last solve report.
    """

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class AsymmetryError(DrifthomError, ValueError):
    pass


class SingularMatrix(DrifthomError, ArithmeticError):
    pass


class CallbackDomainError(DrifthomError, ValueError):
    """A coefficient callback returned values of the wrong shape or non-finite values."""


class FluxError(DrifthomError, ValueError):
    pass


class FitDiverged(DrifthomError, RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class ConfigError(DrifthomError, ValueError):
    """Configuration failed validation. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class SchemaError(DrifthomError, ValueError):
    pass
