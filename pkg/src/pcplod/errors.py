"""Exception hierarchy shared by all toolkit modules."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ToolkitError):
    """A file cell could not be parsed; message carries row/column location."""


class SchemaError(ToolkitError):
    """File layout or detection-limit metadata violates the declared schema."""


class DomainError(ToolkitError):
    """Input values outside the domain the operation is defined on."""


class DegenerateColumnError(DomainError):
    """A column lacks the spread needed for the requested operation."""


class InsufficientDataError(DomainError):
    """Too few usable entries to carry out the operation."""


class UndefinedMetricError(DomainError):
    """A metric's denominator vanishes, leaving the value undefined."""


class ConfigError(ToolkitError):
    """Invalid configuration or out-of-range parameter."""


class NumericalError(ToolkitError):
    """Numerical failure: divergence, non-finite values, or a failed factorization."""
