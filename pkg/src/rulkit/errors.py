"""Exception types shared across the toolkit.

Data errors map to CLI exit code 3, usage/config errors to 2,
simulation faults to 4.
"""


class RulkitError(Exception):
    """Base class for toolkit errors."""


class DataError(RulkitError):
    """Base class for dataset-level problems."""


class SchemaError(DataError):
    """The input file lacks a required column."""


class EmptyDatasetError(DataError):
    """The input file has a header but no usable data rows."""


class DegenerateTargetError(DataError):
    """The RUL column has too few distinct values to bin into terciles."""


class SplitError(DataError):
    """A requested split or fold count cannot be produced."""


class DivergenceError(RulkitError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
