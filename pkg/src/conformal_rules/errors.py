"""Exception hierarchy shared by the library and the CLI."""


class ConformalRulesError(Exception):
    pass


class ConfigError(ConformalRulesError, ValueError):
    """Invalid parameters or option combinations."""


class DataError(ConformalRulesError, ValueError):
    """Base class for problems with input data."""


class ParseError(DataError):
    """Malformed input text. ``line`` is 1-based when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class LabelValidationError(DataError):
    """A label entry is not a bit."""


class UnsupportedFeatureError(DataError):
    """Input uses a format feature this package does not handle (missing values, sparse rows...)."""


class UndefinedMetricError(ConformalRulesError, ArithmeticError):
    """A metric was requested on an empty set of (instance, label) pairs."""
