"""Exception hierarchy shared by every package."""


class SixStateError(Exception):
    """Base class for all toolkit errors."""


class DomainError(SixStateError, ValueError):
    """An argument is outside the domain an operation accepts."""


class InvariantViolation(SixStateError):
    """An internal invariant failed; indicates a bug, not bad input."""


class InfeasibleError(SixStateError):
    """The requested target cannot be met (e.g. error above the Steane threshold)."""


class SessionError(SixStateError):
    """Base class for two-party session failures."""


class TransportError(SessionError):
    """The byte stream between the parties failed or closed early."""


class TranscriptError(SessionError):
    """A transcript is malformed, truncated, or diverges from a replay."""
