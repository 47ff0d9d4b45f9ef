"""Exception hierarchy shared across the package."""


class DWLabError(Exception):
    """Base class for all errors raised by dwlab."""


class InvalidInput(DWLabError, ValueError):
    pass


class ParseError(DWLabError, ValueError):
    """Syntax error in a map expression.

    ``offset`` is the byte offset into the source text, ``expected`` the set of
    token kinds that would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class EvaluationError(DWLabError, ArithmeticError):
    pass


class ClassificationError(DWLabError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UndecidedError(ClassificationError):
    pass


class EllipticAutomorphismError(ClassificationError):
    pass


class MisclassificationError(ClassificationError):
    pass


class OrbitTooShort(ClassificationError):
    pass


class GridError(DWLabError):
    pass


class SolverDidNotConverge(GridError):
    pass


class PreconditionError(DWLabError):
    pass
