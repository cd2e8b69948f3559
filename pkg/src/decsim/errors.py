"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, anything else exits 3.
"""


class DecsimError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(DecsimError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(DecsimError):
    """An experiment config file is malformed or inconsistent."""


class DataFormatError(DecsimError):
    """A dataset file does not match its declared binary format."""


class CapacityError(DecsimError):
    """A partition scheme demands more samples than the dataset holds."""


class MetricUndefinedError(DecsimError):
    """A metric was requested on an empty or degenerate population."""


class DomainError(DecsimError, ValueError):
    """A metric argument lies outside the comparable domain (e.g. a node
    that does not survive in both runs being compared)."""
