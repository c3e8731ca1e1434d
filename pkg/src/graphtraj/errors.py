"""Exception types raised across the package."""


class GraphTrajError(Exception):
    pass


class InvalidInterval(GraphTrajError, ValueError):
    pass


class UnknownVertex(GraphTrajError, KeyError):
    pass


class EmptyQueryInterval(GraphTrajError, ValueError):
    pass


class IntervalNotNested(GraphTrajError, ValueError):
    pass


class QueryOutsideIndexInterval(GraphTrajError):
    """The query interval is not contained in the interval an index was built over.

    Callers are expected to fall back to an exact scan.
    """


class IndexMissing(GraphTrajError):
    pass


class ZeroReference(GraphTrajError, ZeroDivisionError):
    pass


class ParseError(GraphTrajError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DisconnectedGraph(GraphTrajError, ValueError):
    pass


class NonPositiveWeight(GraphTrajError, ValueError):
    pass


class ValidationError(GraphTrajError, ValueError):
    def __init__(self, traj_id, violations):
        self.traj_id = traj_id
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations)
        super().__init__(f"trajectory {traj_id}: {detail}")


class TooFewPoints(GraphTrajError, ValueError):
    pass


class IndexFormatError(GraphTrajError, ValueError):
    pass
