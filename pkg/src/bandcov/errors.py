"""Exception types shared across the package.

The CLI maps each class to its own exit status, so keep the hierarchy flat.
"""


class BandcovError(Exception):
    """Base class for all errors raised by bandcov."""


class DataError(BandcovError, ValueError):
    """Input data is unusable: too few rows, non-finite cells, ragged CSV."""


class DegenerateError(BandcovError, ArithmeticError):
    """The statistic is undefined for this data (e.g. V_nk <= 0)."""


class ParameterError(BandcovError, ValueError):
    """A tuning parameter is out of its admissible range."""
