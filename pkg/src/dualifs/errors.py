"""Exception types shared across the package."""


class DualIFSError(Exception):
    """Base class for library errors."""


class ExprSyntaxError(SyntaxError, DualIFSError):
    def __init__(self, message: str, position: int, source: str = ""):
        super().__init__(f"{message} at position {position}")
        self.position = position
        self.source = source


class DomainError(DualIFSError, ArithmeticError):
    pass


class ToleranceNotReached(DualIFSError):
    def __init__(self, message: str, enclosure=None):
        super().__init__(message)
        self.enclosure = enclosure


class LetterOutOfRange(DualIFSError, ValueError):
    pass


class SizeLimit(DualIFSError):
    pass


class EnvelopeNotFound(DualIFSError):
    pass


class OrderTooHigh(DualIFSError, ValueError):
    pass


class EtaTooLarge(DualIFSError, ValueError):
    pass


class ArityMismatch(DualIFSError, ValueError):
    pass


class SingletonAttractor(DualIFSError):
    pass


class InvalidProbability(DualIFSError, ValueError):
    pass


class NotMonotone(DualIFSError):
    pass


class SelectionExhausted(DualIFSError):
    pass


class ConstraintInfeasible(DualIFSError):
    pass


class InvalidMap(DualIFSError, ValueError):
    pass


class NoConvergence(DualIFSError):
    pass
