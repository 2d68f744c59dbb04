"""Exception types shared by every module.

The CLI maps these onto exit codes: config errors exit 2, domain errors exit 3.
"""


class StructuralError(ValueError):
    """Malformed path, grid or time-change data."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid run configuration, sampler pairing or option."""


class UsageError(TypeError):
    """An operation was called with an inconsistent combination of arguments."""
