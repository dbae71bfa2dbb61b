"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit with 1,
``DataError`` with 2, ``NumericalError`` with 3.
"""


class MahaganError(Exception):
    """Base class for errors raised by this package."""


class DataError(MahaganError):
    """Input data is missing, malformed, or too small for the operation."""


class NumericalError(MahaganError):
    """A numerical routine failed: non-finite values, a factorization that
    cannot succeed, or a degenerate fit."""
