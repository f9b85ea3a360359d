"""Exception hierarchy shared by every module of the package."""


class NetError(Exception):
    """Base class for all errors raised by ssplive."""


class StructuralError(NetError):
    """A net, marking or decomposition is malformed for the requested operation."""


class FiringError(NetError):
    """A transition was fired at a marking that does not enable it."""

    def __init__(self, transition, deficient, index=None):
        self.transition = transition
        self.deficient = dict(deficient)
        self.index = index
        where = "" if index is None else f" at step {index}"
        missing = ", ".join(f"{p} (needs {n})" for p, n in self.deficient.items())
        super().__init__(f"{transition} is not enabled{where}: {missing}")


class TruncatedGraphError(NetError):
    """Raised when an exact count is requested from a truncated reachability graph."""


class ParseError(NetError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)


class SemiflowLimitError(NetError):
    """Farkas elimination produced more intermediate vectors than allowed."""

    def __init__(self, message, partial=None):
        self.partial = partial or []
        super().__init__(message)


class SiphonLimitError(NetError):
    pass


class EnforcementError(NetError):
    """Liveness enforcement could not be carried out (no check transition, or result not live)."""


class SupervisorError(NetError):
    """Contract violation in the supervised evolution (bad policy choice, violated hypothesis)."""
