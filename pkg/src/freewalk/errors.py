"""Exception classes shared across the package."""


class FreewalkError(Exception):
    """Base class for package-specific errors."""


class MalformedInputError(FreewalkError, ValueError):
    """Raised when input data violates a documented precondition."""


class UnsupportedContextError(FreewalkError, ValueError):
    """Raised when an operation needs structure the group context lacks,
    e.g. pattern machinery on a single-factor product."""


class PreconditionError(FreewalkError, ValueError):
    """Raised when a semantic precondition fails, e.g. a claimed
    pattern-avoiding set turns out not to avoid."""


class ResourceLimitError(FreewalkError, RuntimeError):
    """Raised when an enumeration or state space exceeds a configured cap.

    Attributes:
        cap: the limit that was exceeded.
    """

    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap
