"""Exception hierarchy for the ll0 package."""


class LL0Error(Exception):
    """Base class for all errors raised by ll0."""


class InvalidDimensionError(LL0Error, ValueError):
    pass


class InvalidNetworkError(LL0Error, ValueError):
    pass


class InvalidTargetError(LL0Error, ValueError):
    pass


class DegenerateActivationError(LL0Error, ArithmeticError):
    pass


class DatasetError(LL0Error, ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaError(DatasetError):
    pass


class ConfigError(LL0Error, ValueError):
    pass
