"""Exception hierarchy shared by all toklab modules.

The CLI maps these onto its exit-code contract: UsageError -> 1,
DataError (and subclasses) -> 2, InternalError -> 3.
"""


class ToklabError(Exception):
    """Base class for all toklab errors."""


class UsageError(ToklabError):
    """Bad invocation: unknown flags, inconsistent options, missing arguments."""


class DataError(ToklabError):
    """Input data violates the documented format or invariants."""


class ModelFormatError(DataError):
    """A model file is malformed, truncated, or from an unknown format version."""


class StatsError(DataError):
    """A statistical operation was called outside its preconditions
    (zero variance, degenerate split, correlation too close to +/-1)."""


class InternalError(ToklabError):
    """An internal invariant was violated; indicates a bug, not bad input."""
