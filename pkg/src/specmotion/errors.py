"""Shared exception types."""


class DataError(ValueError):
    """Input data violates a contract (non-finite values, bad shape, bad range)."""


class DimensionMismatchError(DataError):
    """Two inputs that must share dimensions do not."""
