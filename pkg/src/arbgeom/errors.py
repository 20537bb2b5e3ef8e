"""Exception hierarchy shared by all modules."""


class ArbGeomError(Exception):
    """Base class for every error raised by arbgeom."""


class DomainError(ArbGeomError, ValueError):
    """A point or parameter lies outside the domain of an operation."""


class UnsupportedDimensionError(ArbGeomError, ValueError):
    pass


class PreconditionError(ArbGeomError, ValueError):
    pass


class DegenerateDirectionError(ArbGeomError, ValueError):
    pass


class DegenerateMetricError(ArbGeomError, ValueError):
    """Raised when a Fisher metric is not symmetric positive-definite."""


class ConvergenceError(ArbGeomError, RuntimeError):
    pass


class StiffnessError(ArbGeomError, RuntimeError):
    pass


class SingularityError(ArbGeomError, ValueError):
    pass


class SizeError(ArbGeomError, ValueError):
    """Enumeration would exceed the configured tuple bound."""


class UnderflowError(ArbGeomError, ArithmeticError):
    pass


class GraphError(ArbGeomError, ValueError):
    pass


class ParseError(ArbGeomError, ValueError):
    def __init__(self, message, line=None, column=None, unit="line"):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"{unit} {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class DuplicateEdgeError(ParseError):
    pass
