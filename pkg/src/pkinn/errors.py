"""Exception hierarchy shared across the package."""


class PKINNError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PKINNError, ValueError):
    pass


class InvalidGridError(InvalidArgumentError):
    pass


class InvalidSpecError(InvalidArgumentError):
    pass


class ShapeError(PKINNError, ValueError):
    pass


class UnsupportedError(PKINNError):
    pass


class GraphError(PKINNError, TypeError):
    """Raised when a computation uses a primitive the autodiff graph cannot differentiate."""


class DivergedError(PKINNError, FloatingPointError):
    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class IllConditionedError(PKINNError, ArithmeticError):
    pass


class InsufficientDataError(InvalidArgumentError):
    pass


class DataError(PKINNError, ValueError):
    """Malformed input file."""


class ConfigError(PKINNError, ValueError):
    pass


class ExportError(PKINNError, OSError):
    pass
