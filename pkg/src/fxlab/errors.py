"""Exception hierarchy shared by every fxlab module."""


class FxlabError(Exception):
    """Base class for all errors raised by fxlab."""


class GraphError(FxlabError, ValueError):
    pass


class EmptyGraph(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class RowNotStochastic(GraphError):
    pass


class NotStronglyConnected(GraphError):
    pass


class ParseError(GraphError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DirectedUnsupported(FxlabError):
    """Operation is only defined on undirected graphs."""


class TooLarge(FxlabError):
    """Exact enumeration requested above the configured node cap."""


class SolverSingular(FxlabError):
    """A linear system that should be nonsingular was not. Indicates a bug."""


class ExcessiveTimeouts(FxlabError):
    """Too many Monte-Carlo trials hit the step cap.

    The offending estimate is attached so callers can still report it.
    """

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class OracleFailure(FxlabError):
    pass


class ConfigError(FxlabError, ValueError):
    pass
