"""Exception hierarchy shared across the toolkit.

Each family maps to one CLI exit code so scripted callers can react
without parsing stderr: config 2, data 3, numeric 4.
"""


class TscausalError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(TscausalError):
    """Invalid configuration: unknown keys, bad types, out-of-range values."""

    exit_code = 2


class DataError(TscausalError):
    """Invalid or inconsistent input data: missing files, bad CSV cells,
    overlapping split graph ids, checksum mismatches."""

    exit_code = 3


class NumericError(TscausalError):
    """Numerical failure: NaN losses, diverged simulations, degenerate fits."""

    exit_code = 4
