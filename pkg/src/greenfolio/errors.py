"""Exception hierarchy. Each class maps to one CLI exit code."""


class GreenfolioError(Exception):
    exit_code = 1


class ConfigError(GreenfolioError):
    exit_code = 2


class DataValidationError(GreenfolioError, ValueError):
    exit_code = 3


class ParseError(DataValidationError):
    """A CSV row could not be parsed. ``row`` is the 1-based data row number."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DuplicateTickerError(DataValidationError):
    pass


class NumericalError(GreenfolioError, ArithmeticError):
    exit_code = 4
