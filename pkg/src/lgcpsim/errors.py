"""Exception hierarchy shared by all simulator modules."""


class LgcpError(Exception):
    """Base class for simulator errors."""


class InvalidArgumentError(LgcpError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(LgcpError):
    """A scenario, confidence or config document could not be parsed."""


class ValidationError(LgcpError, ValueError):
    """A parsed document violates a data invariant."""


class SchedulingError(LgcpError):
    """The packet set cannot be scheduled (e.g. it contains an infeasible link)."""


class RefusalError(LgcpError):
    """An exhaustive oracle refused an instance above its size guard."""
