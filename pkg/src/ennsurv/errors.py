"""Exception hierarchy.

Data problems and numeric problems are kept apart so the command line can map
them onto distinct exit codes.
"""


class EnnSurvError(Exception):
    """Base class for all errors raised by this package."""


class DataError(EnnSurvError):
    pass


class NumericError(EnnSurvError):
    pass


class DimensionMismatch(DataError, ValueError):
    pass


class EmptyDataset(DataError, ValueError):
    pass


class TooFewSamples(DataError, ValueError):
    pass


class SchemaMismatch(DataError, ValueError):
    pass


class NegativeTime(DataError, ValueError):
    pass


class NonPositiveDuration(DataError, ValueError):
    def __init__(self, row, value=None):
        self.row = row
        self.value = value
        msg = f"non-positive or missing duration at row {row}"
        if value is not None:
            msg += f" (got {value!r})"
        super().__init__(msg)


class UnreachableLevel(NumericError, ValueError):
    """No finite interval reaches the requested degree of belief."""


class NoComparablePairs(NumericError, ValueError):
    pass


class DegenerateGrid(NumericError, ValueError):
    pass
