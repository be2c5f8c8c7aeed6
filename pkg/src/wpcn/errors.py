"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`WpcnError`,
so callers (and the CLI) can map failures to stable exit codes.
"""


class WpcnError(Exception):
    """Base class for all package errors."""


class DomainError(WpcnError, ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(DomainError):
    """A root-finding bracket does not contain a sign change."""


class UnsupportedAlphaError(DomainError):
    """The operation is only defined for a path-loss exponent of 4."""


class QuantizationError(DomainError):
    """The battery quantization yields U > V (threshold above capacity)."""


class ConvergenceError(WpcnError, ArithmeticError):
    """An iterative numerical method did not converge."""


class InfeasibleParamsError(WpcnError):
    """The parameters admit no valid operating point (e.g. P_min > P_max)."""


class ResourceError(WpcnError):
    """A configured resource cap (state count, time budget) was exceeded."""


class ConfigError(WpcnError, ValueError):
    """A configuration file or value is malformed."""
