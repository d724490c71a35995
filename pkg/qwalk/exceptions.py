"""
Exception hierarchy for the quantum-walk toolkit.

Every error derives from ValueError so callers can keep catching
ValueError the way the service layer does.
"""
from typing import Optional


class QWalkError(ValueError):
    """Base class for all toolkit errors."""


class InvalidLatticeError(QWalkError):
    """Lattice too small or inconsistent with the state/field."""


class BoundaryOverflowError(QWalkError):
    """Amplitude reached the lattice edge; the run is no longer valid."""

    def __init__(self, message: str, t: Optional[int] = None, seed: Optional[int] = None):
        super().__init__(message)
        self.t = t
        self.seed = seed

    def __reduce__(self):
        return (self.__class__, (self.args[0], self.t, self.seed))


class OverOccupationError(QWalkError):
    """More impurities requested than free lattice sites."""


class UndefinedCOGError(QWalkError):
    """Half-side mass is zero."""


class DomainError(QWalkError):
    """Argument outside the domain of a formula."""


class WindowInvalidError(QWalkError):
    """Fit or summation window is empty, out of range or holds zeros."""


class ShapeMismatchError(QWalkError):
    """Arrays that must share a shape do not."""


class SingularInterfaceError(QWalkError):
    """k_prev + k_next vanishes."""


class TotalReflectionError(QWalkError):
    """T22 vanishes so no S-matrix exists."""


class DivergenceError(QWalkError):
    """Path summation loop factor has modulus >= 1."""


class InvalidScattererError(QWalkError):
    """S-matrix is not unitary."""


class ConfigError(QWalkError):
    """Scenario file failed to parse or validate."""

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column

    def __str__(self) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}, column {self.column}")
        if self.field:
            where.append(f"field '{self.field}'")
        base = super().__str__()
        return f"{base} ({'; '.join(where)})" if where else base
