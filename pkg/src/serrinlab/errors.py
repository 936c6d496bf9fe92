"""Exception types raised across the package."""


class SerrinLabError(Exception):
    """Base class for every error raised by serrinlab."""


class DomainError(SerrinLabError, ValueError):
    pass


class NonPositiveRadius(DomainError):
    pass


class NonPositiveAxis(DomainError):
    pass


class UnsupportedDimension(DomainError):
    pass


class ProjectionDiverged(SerrinLabError, RuntimeError):
    pass


class CenterOutsideDomain(SerrinLabError, ValueError):
    pass


class OutsideDomain(SerrinLabError, ValueError):
    pass


class CenterLeftDomain(SerrinLabError, RuntimeError):
    pass


class NoConvergence(SerrinLabError, RuntimeError):
    pass


class IllConditioned(SerrinLabError, RuntimeError):
    pass


class ConditionViolated(SerrinLabError, ValueError):
    pass


class NonPositiveCurvature(SerrinLabError, ValueError):
    pass


class InvalidDimension(SerrinLabError, ValueError):
    pass


class SolverFailure(SerrinLabError, RuntimeError):
    pass


class TooFewPoints(SerrinLabError, ValueError):
    pass
