"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Shape/contract violations inside library code raise
plain ValueError.
"""


class ConfigError(Exception):
    """Invalid or inconsistent configuration (bad key, incompatible sizes)."""


class DataError(Exception):
    """Dataset or file problem (missing files, undecodable images)."""


class NumericError(Exception):
    """Numerical failure at runtime (NaN loss, failed gradient check)."""
