"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericError -> 3.
"""


class EraSegError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EraSegError):
    """Invalid configuration value or unknown configuration key."""


class DataError(EraSegError):
    """Malformed or inconsistent input data."""


class NumericError(EraSegError):
    """Non-finite value detected or optimization diverged."""
