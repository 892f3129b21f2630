"""Exception hierarchy.

The CLI maps the three families to exit codes: ConfigError -> 2,
DataError -> 3, NumericalError -> 4.
"""


class AnnealcastError(Exception):
    exit_code = 1


class ConfigError(AnnealcastError, ValueError):
    exit_code = 2


class ProtocolError(ConfigError):
    """Suite members that cannot be compared (different tasks or test rows)."""


class DataError(AnnealcastError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class EmptyDataError(DataError):
    pass


class DuplicateDateError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateColumnError(DataError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column!r} has no finite training values")


class DegenerateTargetError(DataError):
    pass


class EncodingError(DataError):
    pass


class DomainError(DataError):
    pass


class UndefinedMetricError(DataError):
    pass


class TransportError(DataError):
    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class NumericalError(AnnealcastError, ArithmeticError):
    exit_code = 4


class DivergenceError(NumericalError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss or gradient at epoch {epoch}")


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
