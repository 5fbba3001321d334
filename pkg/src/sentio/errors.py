"""Exception hierarchy shared by every sentio module."""


class SentioError(Exception):
    """Base class for all library errors."""


class ConfigError(SentioError, ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(SentioError, ValueError):
    """Bad input data: unparseable files, misaligned series, missing symbols."""


class ParseError(DataError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class EmptyInputError(DataError):
    pass


class InsufficientOverlapError(DataError):
    def __init__(self, message, symbols=()):
        self.symbols = tuple(symbols)
        super().__init__(message)


class WindowUnderflowError(DataError, IndexError):
    pass


class ShapeError(SentioError, ValueError):
    """Dimension mismatch between arrays, actions, models or environments."""


class ModelFormatError(DataError):
    """Model file is unreadable, truncated or of an unsupported version."""


class InvalidActionError(SentioError, ValueError):
    pass


class EpisodeFinishedError(SentioError, RuntimeError):
    pass


class NumericError(SentioError, ArithmeticError):
    """Training produced a non-finite loss or parameter."""
