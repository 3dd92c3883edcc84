"""Exception hierarchy.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`DataError` to
exit code 3.
"""


class HetExtremesError(Exception):
    """Base class for all package errors."""


class ConfigError(HetExtremesError, ValueError):
    """A parameter or configuration violates a documented constraint."""


class DataError(HetExtremesError, ValueError):
    """Input data are malformed (non-numeric, missing, non-finite)."""


class DegenerateKernelError(ConfigError):
    """Boundary-correction denominator vanishes for the kernel."""


class UnreliableQuantileError(ConfigError):
    """Too few bootstrap replicates for a meaningful empirical quantile."""


class UninformativeTestError(HetExtremesError, ArithmeticError):
    """A self-normalized statistic has a zero denominator."""


class EstimationError(HetExtremesError, ArithmeticError):
    """An estimator is undefined for the given sample."""
