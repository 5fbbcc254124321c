"""Exception hierarchy shared by every module."""


class MortalBanditError(Exception):
    """Base class for all package errors."""


class RangeViolation(MortalBanditError, ValueError):
    """A reward or mean lies outside the declared reward range."""


class AvailabilityError(MortalBanditError, ValueError):
    """An arm was played on a turn it is not alive."""


class NoLiveArmsError(MortalBanditError):
    """The live set M_t is empty."""


class UninitializedError(MortalBanditError):
    """A quantity needs at least one played arm; run initialization first."""


class SizeGuardError(MortalBanditError, ValueError):
    """Matrix too large for the exact permanent; use the closed-form path."""


class EnumerationGuardError(MortalBanditError):
    """History enumeration would exceed the configured node budget."""


class QuadratureError(MortalBanditError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class NotSPDError(MortalBanditError, ValueError):
    """A LinUCB design matrix lost positive definiteness."""


class ConfigError(MortalBanditError, ValueError):
    """Invalid configuration, schedule or template."""


class LogFormatError(MortalBanditError, ValueError):
    """Too many malformed lines in a replay log."""


class StreamExhausted(MortalBanditError):
    """A replay stream ran out before the requested work was done."""
