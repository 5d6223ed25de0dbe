"""Exception hierarchy.

The CLI maps each family onto a stable exit code: validation problems exit 1,
malformed input exits 2 and solver failures exit 3.
"""

from __future__ import annotations


class GoldenConnError(Exception):
    """Base class for every error raised by this package."""


# -- input / parsing --------------------------------------------------------


class ParseError(GoldenConnError):
    """Malformed expression or spec file."""


class ExprSyntaxError(ParseError):
    def __init__(self, position: int, expected: set[str] | frozenset[str], text: str = ""):
        self.position = position
        self.expected = frozenset(expected)
        self.text = text
        exp = ", ".join(sorted(self.expected))
        super().__init__(f"syntax error at offset {position}: expected one of {{{exp}}}")


class UnknownIdentifier(ParseError):
    def __init__(self, name: str, position: int = -1):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r} at offset {position}")


class ArityError(ParseError):
    def __init__(self, function: str, got: int):
        self.function = function
        self.got = got
        super().__init__(f"function {function}() takes exactly 1 argument ({got} given)")


class SpecFileError(ParseError):
    def __init__(self, message: str, path: str = "<spec>", line: int | None = None):
        self.path = path
        self.line = line
        loc = f"{path}:{line}" if line is not None else path
        super().__init__(f"{loc}: {message}")


# -- evaluation --------------------------------------------------------------


class DomainError(GoldenConnError, ArithmeticError):
    def __init__(self, message: str, subexpression: str = ""):
        self.subexpression = subexpression
        if subexpression:
            message = f"{message} in {subexpression!r}"
        super().__init__(message)


class DimensionMismatch(GoldenConnError, ValueError):
    pass


# -- structure validation ----------------------------------------------------


class ValidationError(GoldenConnError):
    """A field fails one of the defining conditions of the structure."""

    def __init__(self, message: str, point=None, residual: float | None = None):
        self.point = point
        self.residual = residual
        super().__init__(message)


class NotGolden(ValidationError):
    pass


class NotAlmostProduct(ValidationError):
    pass


class NotPure(ValidationError):
    pass


class AsymmetricMetric(ValidationError):
    pass


class SingularMetric(ValidationError):
    pass


class NonConstantRank(ValidationError):
    pass


class DegenerateEigenspace(ValidationError):
    pass


class InvalidRank(ValidationError, ValueError):
    pass


class DependentBasis(ValidationError, ValueError):
    pass


# -- connections ----------------------------------------------------------------


class NotTorsionFree(GoldenConnError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"derivation law has torsion (max |T| = {residual:.3e})")


class SolverError(GoldenConnError):
    pass


class SolverResidualTooLarge(SolverError):
    def __init__(self, point, residual: float):
        self.point = point
        self.residual = residual
        super().__init__(f"well-adapted solve left residual {residual:.3e} at point {list(point)}")


class NonUniqueSolution(SolverError):
    def __init__(self, point, nullity: int):
        self.point = point
        self.nullity = nullity
        super().__init__(f"constraint system has a {nullity}-dimensional nullspace at point {list(point)}")
