"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed expression or problem document; carries position info when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)


class EvaluationError(ValueError):
    """Coefficient evaluation produced a non-finite value or failed outright."""

    def __init__(self, message: str, point=None):
        self.point = None if point is None else tuple(float(v) for v in point)
        if self.point is not None:
            message = f"{message} at point {self.point}"
        super().__init__(message)


class ValidationError(ValueError):
    """An admissibility check failed; names the check and a witness point."""

    def __init__(self, check: str, message: str, witness=None):
        self.check = check
        self.witness = None if witness is None else tuple(float(v) for v in witness)
        text = f"{check}: {message}"
        if self.witness is not None:
            text = f"{text} (witness {self.witness})"
        super().__init__(text)


class BoundaryViolationError(ValueError):
    """A trial or test function does not vanish on the domain boundary."""

    def __init__(self, message: str, witness=None, value: float | None = None):
        self.witness = None if witness is None else tuple(float(v) for v in witness)
        self.value = value
        if self.witness is not None:
            message = f"{message} (witness {self.witness}, value {value})"
        super().__init__(message)


class SolveError(RuntimeError):
    """Iterative linear solve failed: breakdown or non-convergence."""

    def __init__(self, message: str, iterations: int | None = None, residual: float | None = None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class PositivityError(RuntimeError):
    """The constructed weight has a non-positive node value."""

    def __init__(self, message: str, witness=None, value: float | None = None):
        self.witness = None if witness is None else tuple(float(v) for v in witness)
        self.value = value
        super().__init__(message)
