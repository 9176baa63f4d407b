"""Exception types raised across the package."""


class SCChainError(Exception):
    """Base class for all package errors."""


class InvalidParameters(SCChainError, ValueError):
    pass


class ConstructionUnsupported(SCChainError, ValueError):
    pass


class InvalidSpec(SCChainError, ValueError):
    """A CC description violates a socket or degree constraint.

    ``edge`` carries the offending connection when one can be identified.
    """

    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class ReliftRequired(SCChainError, RuntimeError):
    """The lifted code cannot be encoded sequentially; lift again with another seed."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class FitFailure(SCChainError, RuntimeError):
    pass


class DomainError(SCChainError, ValueError):
    pass


class ScheduleMismatch(SCChainError, ValueError):
    pass
