"""Exception hierarchy.

Parameter and configuration problems derive from ``ValueError``; numerical
breakdowns (singular covariances, non-convergence, rank-deficient systems)
derive from ``ArithmeticError``. The CLI maps the two families to distinct
exit codes.
"""


class InfoAggError(Exception):
    """Base class for all package errors."""


class ParameterError(InfoAggError, ValueError):
    pass


class NonPositiveStdDev(ParameterError):
    pass


class NegativeStdDev(ParameterError):
    pass


class NegativePublishers(ParameterError):
    pass


class WrongScenario(ParameterError):
    """Operation called for an economy it does not cover (e.g. m != 0)."""


class DimensionMismatch(ParameterError):
    pass


class InsufficientReps(ParameterError):
    pass


class NonInvertibleQueryMap(ParameterError):
    pass


class ConfigError(InfoAggError, ValueError):
    pass


class NumericalError(InfoAggError, ArithmeticError):
    pass


class SingularCovariance(NumericalError):
    pass


class NonPositiveDeterminant(NumericalError):
    pass


class ZeroPriceLoading(NumericalError):
    pass


class DegenerateRecovery(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class InversionConditioningError(NumericalError):
    pass
