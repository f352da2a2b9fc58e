"""Exception types raised across the package."""


class MSDPError(ValueError):
    """Base class for all package errors."""


class NonIntegrableTail(MSDPError):
    pass


class GapOrOverlap(MSDPError):
    pass


class Discontinuity(MSDPError):
    """An unflagged jump between adjacent segments."""


class PrivacyViolated(MSDPError):
    pass


class EndpointMismatch(MSDPError):
    pass


class EmptyOffsets(MSDPError):
    pass


class NonPositiveEpsilon(MSDPError):
    pass


class InvalidK(MSDPError):
    pass


class NonConvergent(MSDPError):
    pass


class NonPositiveDerivative(MSDPError):
    pass


class InvalidDisutility(MSDPError):
    pass


class StepTooLarge(MSDPError):
    pass


class BoundViolated(MSDPError):
    pass


class DomainMismatch(MSDPError):
    pass


class InsufficientCounts(MSDPError):
    pass


class WireFormatError(MSDPError):
    pass


class BudgetExhausted(UserWarning):
    """Coordinate search made no progress from any start; best found is still returned."""
