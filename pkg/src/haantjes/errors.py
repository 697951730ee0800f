"""Exception hierarchy shared by the whole package."""


class HaantjesError(Exception):
    """Base class for every error raised by this package."""


class ExpressionError(HaantjesError, ValueError):
    pass


class ParseError(ExpressionError):
    """Syntax error in an expression, with the 0-based column of the offending token."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExpressionError):
    pass


class DomainError(HaantjesError, ArithmeticError):
    """Evaluation left the domain of an operation (division by zero, log of a nonpositive value, ...)."""

    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        if subexpression:
            message = f"{message} in '{subexpression}'"
        super().__init__(message)


class DimensionError(HaantjesError, ValueError):
    pass


class LocalityError(HaantjesError, ValueError):
    """A Stäckel row, Stäckel function or eigenvalue function depends on a forbidden variable."""


class SingularMatrixError(HaantjesError, ArithmeticError):
    def __init__(self, message: str, det: float = 0.0):
        self.det = det
        super().__init__(f"{message} (det = {det:.3e})")


class CollisionError(HaantjesError, ArithmeticError):
    """Two eigenvalues (or particle coordinates) coincide within tolerance."""


class ProjectionError(HaantjesError, ValueError):
    def __init__(self, message: str, max_derivative: float = 0.0):
        self.max_derivative = max_derivative
        super().__init__(message)


class ModelFileError(HaantjesError, ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column else "")
        super().__init__(f"{where}: {message}" if line else message)
