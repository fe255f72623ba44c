"""
Error hierarchy for the forecaster

Library code raises these; the CLI maps them to process exit codes.
"""
from typing import Optional


class ForecasterError(Exception):
    """
    Base class for every error the forecaster raises on purpose
    """
    exit_code = 1

    def __init__(self, message: str, detail: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class ConfigError(ForecasterError):
    """Invalid configuration, flags or hyperparameters"""
    exit_code = 2


class DimensionError(ConfigError):
    """Array shapes do not match what an operation expects"""


class DataError(ForecasterError):
    """Input data could not be ingested or is unusable"""
    exit_code = 3


class ParseError(DataError):
    """
    A CSV cell or row could not be parsed

    Carries the 1-based line number of the file and the column name.
    """

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message, {"line": line, "column": column})
        self.line = line
        self.column = column


class EmptyDatasetError(DataError):
    """The input file holds no rows"""


class TrainingError(ForecasterError):
    """Training cannot start or diverged"""
    exit_code = 3


class IntegrityError(ForecasterError):
    """A checkpoint, manifest or artifact failed validation"""
    exit_code = 4

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message, {"offset": offset})
        self.offset = offset


class VersionError(IntegrityError):
    """Checkpoint written by an incompatible format version"""


class DomainError(DataError, ValueError):
    """A numeric argument lies outside the domain of the operation"""
