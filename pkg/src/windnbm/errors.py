"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, anything else exits 3.
"""


class ConfigError(ValueError):
    """A configuration value or file is invalid or inconsistent."""


class DataError(ValueError):
    """Input data violates a schema, invariant, or interface contract."""


class UndefinedCorrelationError(DataError):
    """Pearson correlation is undefined (zero variance or too few pairs)."""
