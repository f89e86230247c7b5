"""Exception hierarchy shared by every layer of the workbench."""

from typing import Optional


class RefineError(Exception):
    """Base exception for workbench errors."""
    pass


class ParseError(RefineError):
    """Source text could not be turned into an AST.

    Attributes:
        code: Stable reason code (SyntaxError, UnknownIdentifier, ...)
        line: 1-based line of the offending token
        column: 1-based column of the offending token
    """

    def __init__(self, message: str, line: int = 0, column: int = 0, code: str = "SyntaxError"):
        self.code = code
        self.line = line
        self.column = column
        self.reason = message
        super().__init__(f"{code} at {line}:{column}: {message}")


class WellFormednessError(RefineError):
    """A parsed program violates a static requirement."""

    def __init__(self, message: str, code: str = "NotContinuouslyInitialized"):
        self.code = code
        super().__init__(f"{code}: {message}")


class EvalError(RefineError):
    """Expression evaluated on ill-typed operands."""
    pass


class HeapInvariantError(RefineError):
    """Attempt to build a heap cell with a permission outside (0, 1]."""
    pass


class BudgetExceeded(RefineError):
    """A bounded enumeration ran past its configured limit.

    Attributes:
        budget: Name of the exhausted budget
        limit: The configured limit
    """

    def __init__(self, budget: str, limit: int):
        self.budget = budget
        self.limit = limit
        super().__init__(f"budget '{budget}' exceeded (limit {limit})")


class MissingAnnotation(RefineError):
    """Outline elaboration needs an annotation the program does not carry."""

    def __init__(self, kind: str, location: str):
        self.kind = kind
        self.location = location
        super().__init__(f"missing {kind} annotation at {location}")


class DerivationFormatError(RefineError):
    """A derivation file is structurally malformed."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(message if path is None else f"{message} (node {path})")
