class Error(Exception):
    pass


class FiniteDifferenceError(Error):
    """
    A finite-difference probe produced a non-finite value.
    """

    def __init__(self, message, coordinate=None):
        super(FiniteDifferenceError, self).__init__(message)
        self.coordinate = coordinate


class MaxIterations(Error):
    """
    An iterative solver ran out of iterations (or line-search halvings).
    """


class NonFiniteStart(Error):
    """
    The log target is not finite at the solver's initial point.
    """


class IndefiniteCurvature(Error):
    """
    The negative Hessian could not be factored even after the maximal jitter.
    """


class DomainEscape(Error):
    """
    The saddlepoint iterates could not be kept inside the CGF domain; usually the
    requested point lies outside the range of K'.
    """


class InverseMapDiverged(Error):
    """
    The Newton solve mapping mean coordinates back to canonical ones failed.
    """


class OutOfSupport(Error):
    pass


class DimensionTooLarge(Error):
    pass


class ToleranceNotReached(Error):
    pass


class DegenerateWeights(Error):
    """
    Importance weights collapsed onto too few draws (effective sample size below the floor).
    """


class InsufficientSpread(Error):
    pass


class ConfigError(Error):
    pass


class EndpointMassWarning(UserWarning):
    pass
