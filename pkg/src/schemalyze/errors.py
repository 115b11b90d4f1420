"""Exception hierarchy shared by every analysis stage."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from schemalyze.ir import SourceSpan


class SchemalyzeError(Exception):
    """Base class for analysis errors. Carries an optional source span."""

    def __init__(self, message: str, span: SourceSpan | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self) -> str:
        if self.span is None:
            return self.message
        return f"{self.span.line}:{self.span.column}: {self.message}"


class SchemaSyntaxError(SchemalyzeError):
    """Input text does not match the grammar."""

    def __init__(self, message: str, span: SourceSpan | None = None,
                 expected: frozenset[str] = frozenset()) -> None:
        if expected:
            message = f"{message} (expected one of: {', '.join(sorted(expected))})"
        super().__init__(message, span)
        self.expected = expected


class ValidationError(SchemalyzeError):
    pass


class ArityMismatch(ValidationError):
    pass


class UnrangeRestrictedVariable(ValidationError):
    pass


class FdOutOfBounds(ValidationError):
    pass


class NonStratifiable(ValidationError):
    pass


class DuplicateBaseDecl(ValidationError):
    pass


class BasePredicateInHead(ValidationError):
    pass


class UnclassifiableRule(SchemalyzeError):
    pass


class NonLinearRecursion(SchemalyzeError):
    pass


class UnknownQuery(SchemalyzeError):
    pass


class UnmappedColumn(SchemalyzeError):
    pass


class DepthCapExceeded(SchemalyzeError):
    pass


class SoundnessViolation(SchemalyzeError):
    """A derived FD fails on a concrete instance. ``witness`` reproduces it."""

    def __init__(self, message: str, witness: dict) -> None:
        super().__init__(message)
        self.witness = witness
