"""
Exception hierarchy for balens.

Every error raised on purpose by the library derives from BalensError, so the
CLI can turn any of them into a one-line diagnostic and exit code 1.
"""

from typing import Optional


class BalensError(Exception):
    """Base class for all balens errors"""


class DataError(BalensError, ValueError):
    """Input data violates a contract; optionally pinned to a row and column"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


# Ingestion
class MalformedCsv(DataError):
    pass


class UnknownTarget(DataError):
    pass


class UnparsableLabel(DataError):
    pass


class NonNumericValue(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


# Preprocessing
class SingleClassDataset(DataError):
    pass


class AllMissingFeature(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class MissingCellPresent(DataError):
    pass


class TooFewClassMembers(DataError):
    pass


# Learners
class EmptyInput(DataError):
    pass


class NegativeWeight(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# Metrics
class LengthMismatch(DataError):
    pass


class EmptyConfusion(DataError):
    pass


class EmptyList(DataError):
    pass


class ZeroRow(DataError):
    pass


class EmptyReport(BalensError):
    pass


# Configuration
class ConfigInvalid(BalensError, ValueError):
    pass


class SpecInvalid(ConfigInvalid):
    pass
