# src/errors.py


class TrudiError(Exception):
    """Base class for every error raised by the package"""


class InvalidArgument(TrudiError, ValueError):
    """A parameter or configuration value is out of range"""


class BudgetExceeded(TrudiError):
    """Backtracking asked for more hash steps than the configured cap"""


class IntegrityFailure(TrudiError):
    """
    A byte sequence is not a frame produced with the shared SC key.

    Malformed, truncated and MAC-mismatching input all raise this same
    error so callers cannot tell the cases apart.
    """


class AttackExhausted(TrudiError):
    """The brute-force budget was spent without finding a usable chain"""
