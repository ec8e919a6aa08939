from __future__ import annotations
from typing import Any, Dict, Optional


class NeumannLabError(Exception):
    """Base class for every failure the lab reports by name."""


class UnivalenceSuspect(NeumannLabError):
    pass


class NonFinite(NeumannLabError):
    pass


class InvalidExponent(NeumannLabError):
    pass


class DegenerateTriangle(NeumannLabError):
    pass


class NonpositiveWeight(NeumannLabError):
    pass


class ConvergenceFailure(NeumannLabError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ZeroDenominator(NeumannLabError):
    pass


class IndexOutOfRange(NeumannLabError):
    pass


class DivisionByZero(NeumannLabError):
    pass


class LemmaViolation(NeumannLabError):
    def __init__(self, n: int, gap: float, bound: float):
        super().__init__(f"two-weight bound violated at n={n}: gap={gap!r} > bound={bound!r}")
        self.n = n
        self.gap = gap
        self.bound = bound


class InvalidK(NeumannLabError):
    pass


class DegeneratePair(NeumannLabError):
    pass


class InvalidCurve(NeumannLabError):
    pass


class ParseError(NeumannLabError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 token: Optional[str] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column
        self.token = token


class ValidationError(NeumannLabError):
    def __init__(self, field: str, constraint: str):
        super().__init__(f"{field}: violates {constraint}")
        self.field = field
        self.constraint = constraint


class ReportIoError(NeumannLabError):
    pass
