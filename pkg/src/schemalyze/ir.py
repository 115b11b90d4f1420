"""Abstract syntax of the schema language and structural validation.

A :class:`Program` is a plain, immutable value: rules plus keyword-led
declarations (base tables, FDs, functions, calls, explicit dependency
edges). :func:`validate` checks it and resolves arities and strata.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Union

from schemalyze.errors import (
    ArityMismatch,
    BasePredicateInHead,
    DuplicateBaseDecl,
    FdOutOfBounds,
    NonStratifiable,
    UnrangeRestrictedVariable,
    ValidationError,
)

_VAR_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")
_IDENT_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError("line and column are 1-based")


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self) -> None:
        if not _VAR_RE.match(self.name):
            raise ValueError(f"invalid variable name {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    value: str | int | float

    def __post_init__(self) -> None:
        if isinstance(self.value, bool) or not isinstance(self.value, (str, int, float)):
            raise ValueError(f"unsupported constant {self.value!r}")

    def __str__(self) -> str:
        return render_literal(self.value)


Term = Union[Variable, Constant]


def render_literal(value: str | int | float) -> str:
    if isinstance(value, str):
        escaped = (value.replace("\\", "\\\\").replace("'", "\\'")
                   .replace("\n", "\\n").replace("\t", "\\t"))
        return f"'{escaped}'"
    return repr(value)


def is_identifier(name: str) -> bool:
    return bool(_IDENT_RE.match(name))


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]
    negated: bool = False

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> tuple[Variable, ...]:
        """Distinct variables in argument order."""
        return tuple(dict.fromkeys(a for a in self.args if isinstance(a, Variable)))

    def positive(self) -> Atom:
        return replace(self, negated=False)

    def __str__(self) -> str:
        text = f"{self.predicate}({','.join(map(str, self.args))})"
        return f"not {text}" if self.negated else text


@dataclass(frozen=True)
class VarEq:
    left: Variable
    right: Variable

    def __post_init__(self) -> None:
        if self.left == self.right:
            raise ValueError(f"trivial equality {self.left} = {self.right}")

    @property
    def vars(self) -> tuple[Variable, ...]:
        return (self.left, self.right)

    def __str__(self) -> str:
        return f"{self.left}={self.right}"


@dataclass(frozen=True)
class ConstEq:
    var: Variable
    value: Constant

    @property
    def vars(self) -> tuple[Variable, ...]:
        return (self.var,)

    def __str__(self) -> str:
        return f"{self.var}={self.value}"


@dataclass(frozen=True)
class FuncEq:
    """``Var = f(args)``: the variable is computed by a function call."""

    var: Variable
    function: str
    args: tuple[Term, ...] = ()

    @property
    def vars(self) -> tuple[Variable, ...]:
        return tuple(dict.fromkeys((self.var, *(a for a in self.args if isinstance(a, Variable)))))

    @property
    def inputs(self) -> tuple[Variable, ...]:
        return tuple(dict.fromkeys(a for a in self.args if isinstance(a, Variable)))

    def __str__(self) -> str:
        return f"{self.var}={self.function}({','.join(map(str, self.args))})"


COMPARISON_OPS = ("<", "<=", ">", ">=", "!=", "<>")


@dataclass(frozen=True)
class Opaque:
    """A comparison kept for evaluation but ignored by FD analysis."""

    op: str
    left: Term
    right: Term

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    @property
    def vars(self) -> tuple[Variable, ...]:
        return tuple(dict.fromkeys(t for t in (self.left, self.right) if isinstance(t, Variable)))

    @property
    def text(self) -> str:
        return f"{self.left} {self.op} {self.right}"

    def __str__(self) -> str:
        return self.text


Condition = Union[VarEq, ConstEq, FuncEq, Opaque]


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...]
    conditions: tuple[Condition, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.head.negated:
            raise ValueError("rule heads cannot be negated")

    @property
    def positive_body(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if not a.negated)

    @property
    def negative_body(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if a.negated)

    def variables(self) -> tuple[Variable, ...]:
        seen: dict[Variable, None] = {}
        for atom in (self.head, *self.body):
            seen.update(dict.fromkeys(atom.variables()))
        for cond in self.conditions:
            seen.update(dict.fromkeys(cond.vars))
        return tuple(seen)

    def __str__(self) -> str:
        literals = [str(a) for a in self.body] + [str(c) for c in self.conditions]
        return f"{self.head} :- {', '.join(literals)}."


@dataclass(frozen=True)
class BaseDecl:
    predicate: str
    attributes: tuple[str, ...]
    span: SourceSpan | None = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.attributes)


@dataclass(frozen=True)
class FdDecl:
    predicate: str
    lhs: frozenset[int]
    rhs: int
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FuncDecl:
    name: str
    arity: int
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class WritesDecl:
    """Side effect of a function on a base table (``func f writes b.``)."""

    function: str
    table: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FtypeDecl:
    function: str
    ftype: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class CallDecl:
    view: str
    inputs: frozenset[int]
    output: int
    function: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class DepDecl:
    """Explicit edge ``source -> target`` (e.g. trigger wiring)."""

    source: str
    target: str
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...] = ()
    base_decls: tuple[BaseDecl, ...] = ()
    fd_decls: tuple[FdDecl, ...] = ()
    func_decls: tuple[FuncDecl, ...] = ()
    call_decls: tuple[CallDecl, ...] = ()
    writes_decls: tuple[WritesDecl, ...] = ()
    ftype_decls: tuple[FtypeDecl, ...] = ()
    dep_decls: tuple[DepDecl, ...] = ()

    @property
    def bases(self) -> dict[str, BaseDecl]:
        return {d.predicate: d for d in self.base_decls}

    @property
    def functions(self) -> dict[str, int]:
        return {d.name: d.arity for d in self.func_decls}

    def head_predicates(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(r.head.predicate for r in self.rules))

    def rules_for(self, predicate: str) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.head.predicate == predicate)


@dataclass(frozen=True)
class ValidatedProgram:
    program: Program
    arities: dict[str, int]
    strata: dict[str, int]
    index: dict[str, int]

    @property
    def rules(self) -> tuple[Rule, ...]:
        return self.program.rules

    @property
    def base_predicates(self) -> frozenset[str]:
        return frozenset(d.predicate for d in self.program.base_decls)

    @property
    def derived_predicates(self) -> frozenset[str]:
        return frozenset(self.program.head_predicates())


def bound_variables(rule: Rule) -> set[Variable]:
    """Variables bound by positive atoms or by equality/function chains to them."""
    bound: set[Variable] = set()
    for atom in rule.positive_body:
        bound.update(atom.variables())
    changed = True
    while changed:
        changed = False
        for cond in rule.conditions:
            new: Variable | None = None
            if isinstance(cond, VarEq):
                if cond.left in bound and cond.right not in bound:
                    new = cond.right
                elif cond.right in bound and cond.left not in bound:
                    new = cond.left
            elif isinstance(cond, ConstEq):
                if cond.var not in bound:
                    new = cond.var
            elif isinstance(cond, FuncEq):
                if cond.var not in bound and all(v in bound for v in cond.inputs):
                    new = cond.var
            if new is not None:
                bound.add(new)
                changed = True
    return bound


def _iter_atoms(program: Program) -> Iterator[tuple[Rule, Atom]]:
    for rule in program.rules:
        yield rule, rule.head
        for atom in rule.body:
            yield rule, atom


def _check_range_restriction(rule: Rule) -> None:
    if not rule.positive_body:
        raise UnrangeRestrictedVariable(
            f"rule for {rule.head.predicate} has no positive body atom", rule.span)
    bound = bound_variables(rule)
    places: list[tuple[str, Iterable[Variable]]] = [("head", rule.head.variables())]
    places += [(f"negated atom {a.predicate}", a.variables()) for a in rule.negative_body]
    places += [(f"condition {c}", c.vars) for c in rule.conditions]
    for where, variables in places:
        for var in variables:
            if var not in bound:
                raise UnrangeRestrictedVariable(
                    f"variable {var} in {where} of rule for {rule.head.predicate} is not range restricted",
                    rule.span)


def _compute_strata(program: Program, predicates: Iterable[str]) -> dict[str, int]:
    strata = {p: 0 for p in predicates}
    limit = len(strata)
    changed = True
    while changed:
        changed = False
        for rule in program.rules:
            head = rule.head.predicate
            for atom in rule.body:
                need = strata[atom.predicate] + (1 if atom.negated else 0)
                if strata[head] < need:
                    if need > limit:
                        raise NonStratifiable(
                            f"predicate {head} depends negatively on itself", rule.span)
                    strata[head] = need
                    changed = True
    return strata


def validate(program: Program | ValidatedProgram) -> ValidatedProgram:
    """Check structural invariants; resolve arities, implicit bases and strata.

    Body predicates that are neither declared nor defined become implicit
    base tables with attribute names ``col1..colN``.
    """
    if isinstance(program, ValidatedProgram):
        program = program.program

    arities: dict[str, int] = {}
    seen_bases: set[str] = set()
    for decl in program.base_decls:
        if decl.predicate in seen_bases:
            raise DuplicateBaseDecl(f"base table {decl.predicate} declared twice", decl.span)
        seen_bases.add(decl.predicate)
        arities[decl.predicate] = decl.arity

    for rule, atom in _iter_atoms(program):
        known = arities.setdefault(atom.predicate, atom.arity)
        if known != atom.arity:
            raise ArityMismatch(
                f"{atom.predicate} used with arity {atom.arity}, expected {known}", rule.span)

    heads = set(program.head_predicates())
    for rule in program.rules:
        if rule.head.predicate in seen_bases:
            raise BasePredicateInHead(
                f"base table {rule.head.predicate} cannot be defined by a rule", rule.span)

    implicit = []
    for rule in program.rules:
        for atom in rule.body:
            p = atom.predicate
            if p not in heads and p not in seen_bases:
                seen_bases.add(p)
                implicit.append(BaseDecl(p, tuple(f"col{i}" for i in range(1, atom.arity + 1))))
    if implicit:
        program = replace(program, base_decls=program.base_decls + tuple(implicit))

    for rule in program.rules:
        _check_range_restriction(rule)

    functions: dict[str, int] = {}
    for fdecl in program.func_decls:
        if fdecl.name in functions:
            raise ValidationError(f"function {fdecl.name} declared twice", fdecl.span)
        functions[fdecl.name] = fdecl.arity

    for rule in program.rules:
        for cond in rule.conditions:
            if isinstance(cond, FuncEq) and cond.function in functions \
                    and functions[cond.function] != len(cond.args):
                raise ArityMismatch(
                    f"function {cond.function} called with {len(cond.args)} arguments, "
                    f"declared with {functions[cond.function]}", rule.span)

    for fd in program.fd_decls:
        if fd.predicate not in seen_bases:
            raise FdOutOfBounds(f"fd on {fd.predicate}: not a base table", fd.span)
        arity = arities[fd.predicate]
        cols = set(fd.lhs) | {fd.rhs}
        if any(c < 1 or c > arity for c in cols):
            raise FdOutOfBounds(f"fd on {fd.predicate}: column outside 1..{arity}", fd.span)
        if fd.rhs in fd.lhs:
            raise FdOutOfBounds(f"fd on {fd.predicate}: right side {fd.rhs} occurs on the left", fd.span)

    for call in program.call_decls:
        if call.view not in heads:
            raise FdOutOfBounds(f"call on {call.view}: not a derived predicate", call.span)
        arity = arities[call.view]
        if any(c < 1 or c > arity for c in set(call.inputs) | {call.output}):
            raise FdOutOfBounds(f"call on {call.view}: column outside 1..{arity}", call.span)
        if call.output in call.inputs:
            raise FdOutOfBounds(f"call on {call.view}: output column is also an input", call.span)
        if call.function in functions and functions[call.function] != len(call.inputs):
            raise ArityMismatch(
                f"function {call.function} called with {len(call.inputs)} inputs, "
                f"declared with {functions[call.function]}", call.span)

    for w in program.writes_decls:
        if w.table not in seen_bases:
            raise ValidationError(f"function {w.function} writes unknown base table {w.table}", w.span)

    strata = _compute_strata(program, arities)
    index = {p: i for i, p in enumerate(sorted(arities))}
    return ValidatedProgram(program=program, arities=arities, strata=strata, index=index)
