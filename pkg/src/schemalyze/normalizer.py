"""Rewrite a validated program so that every rule applies one relational operator.

A general rule is decomposed bottom-up: positive atoms are combined into a
left-deep chain of binary joins/products, then conditions are layered as
selections, negated atoms as set differences, binding equalities as
extensions, and a final projection produces the head. Predicates defined
by several rules become left-associated chains of binary unions.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

from schemalyze.errors import UnclassifiableRule
from schemalyze.ir import (
    Atom,
    Condition,
    ConstEq,
    FuncEq,
    Program,
    Rule,
    SourceSpan,
    Term,
    ValidatedProgram,
    VarEq,
    Variable,
    validate,
)


class OperatorKind(str, enum.Enum):
    PROJECTION = "projection"
    EXTENSION = "extension"
    SELECTION = "selection"
    PRODUCT = "product"
    JOIN = "join"
    UNION = "union"
    INTERSECTION = "intersection"
    NEGATION = "negation"

    def __str__(self) -> str:
        return self.value


POSITION_PRESERVING = frozenset({
    OperatorKind.SELECTION, OperatorKind.EXTENSION,
    OperatorKind.NEGATION, OperatorKind.INTERSECTION,
})
POSITION_MAPPED = frozenset({OperatorKind.PROJECTION, OperatorKind.PRODUCT, OperatorKind.JOIN})


@dataclass(frozen=True)
class NormalRule:
    kind: OperatorKind
    head: Atom
    body: tuple[Atom, ...]
    conditions: tuple[Condition, ...] = ()
    origin: SourceSpan | None = field(default=None, compare=False)

    def as_rule(self) -> Rule:
        return Rule(self.head, self.body, self.conditions, self.origin)

    def __str__(self) -> str:
        return str(self.as_rule())


@dataclass(frozen=True)
class NormalProgram:
    rules: tuple[NormalRule, ...]
    generated: dict[str, Rule]
    source: ValidatedProgram

    @property
    def arities(self) -> dict[str, int]:
        arities = dict(self.source.arities)
        for rule in self.rules:
            arities[rule.head.predicate] = rule.head.arity
        return arities

    def as_program(self) -> Program:
        """The normal form as an ordinary program (declarations carried over)."""
        src = self.source.program
        return Program(
            rules=tuple(r.as_rule() for r in self.rules),
            base_decls=src.base_decls, fd_decls=src.fd_decls, func_decls=src.func_decls,
            call_decls=src.call_decls, writes_decls=src.writes_decls,
            ftype_decls=src.ftype_decls, dep_decls=src.dep_decls,
        )


def _distinct_vars(args: Sequence[Term]) -> bool:
    return all(isinstance(a, Variable) for a in args) and len(set(args)) == len(args)


def _union_shaped(rule: Rule | NormalRule) -> bool:
    if len(rule.body) != 1 or rule.conditions:
        return False
    (atom,) = rule.body
    return (not atom.negated and _distinct_vars(rule.head.args)
            and atom.args == rule.head.args)


def _binds(cond: Condition, known: set[Variable]) -> Variable | None:
    """The single variable outside ``known`` that ``cond`` defines from ``known``."""
    if isinstance(cond, VarEq):
        if cond.left in known and cond.right not in known:
            return cond.right
        if cond.right in known and cond.left not in known:
            return cond.left
    elif isinstance(cond, ConstEq):
        if cond.var not in known:
            return cond.var
    elif isinstance(cond, FuncEq):
        if cond.var not in known and all(v in known for v in cond.inputs):
            return cond.var
    return None


def classify(rule: Rule | NormalRule, siblings: Sequence[Rule | NormalRule] | None = None) -> OperatorKind:
    """Return the unique operator template ``rule`` matches.

    ``siblings`` are all rules sharing the head predicate (``rule`` included);
    a union needs them. Without it the rule is assumed to be the only one.
    """
    siblings = list(siblings) if siblings is not None else [rule]
    head = rule.head
    body = rule.body
    if len(siblings) > 1:
        if len(siblings) == 2 and all(_union_shaped(r) for r in siblings):
            return OperatorKind.UNION
        raise UnclassifiableRule(
            f"{head.predicate} has {len(siblings)} rules but they do not form a binary union",
            getattr(rule, "span", None) or getattr(rule, "origin", None))
    if not _distinct_vars(head.args) or not all(_distinct_vars(a.args) for a in body):
        raise UnclassifiableRule(f"rule for {head.predicate} has repeated variables or constants")
    head_vars = set(head.args)

    if len(body) == 1 and not body[0].negated:
        body_args = body[0].args
        body_vars = set(body_args)
        if not rule.conditions:
            if head_vars <= body_vars:
                return OperatorKind.PROJECTION
        else:
            k = len(body_args)
            new = head.args[k:]
            if head.args[:k] == body_args and new:
                binders: dict[Variable, int] = {}
                for cond in rule.conditions:
                    v = _binds(cond, body_vars)
                    if v is None:
                        break
                    binders[v] = binders.get(v, 0) + 1
                else:
                    if set(binders) == set(new) and all(n == 1 for n in binders.values()):
                        return OperatorKind.EXTENSION
            if head.args == body_args and all(set(c.vars) <= body_vars for c in rule.conditions):
                return OperatorKind.SELECTION
    elif len(body) == 2 and not rule.conditions and not body[0].negated:
        left, right = body
        if left.predicate != right.predicate:
            if right.negated:
                if left.args == right.args == head.args:
                    return OperatorKind.NEGATION
            elif left.args == right.args == head.args:
                return OperatorKind.INTERSECTION
            elif set(left.args).isdisjoint(right.args):
                if head.args == left.args + right.args:
                    return OperatorKind.PRODUCT
            elif head_vars == set(left.args) | set(right.args):
                return OperatorKind.JOIN
    raise UnclassifiableRule(f"rule {rule} matches no operator template")


# -- decomposition --------------------------------------------------------

# Body reference: an existing predicate name or the index of a pending step.
_Ref = Union[str, int]


@dataclass
class _Step:
    kind: OperatorKind
    vars: tuple[Variable, ...]
    body: list[tuple[_Ref, tuple[Variable, ...], bool]]
    conditions: tuple[Condition, ...] = ()


class _Namer:
    def __init__(self, taken: set[str]) -> None:
        self.taken = set(taken)
        self.counter = itertools.count(1)

    def fresh(self, prefix: str) -> str:
        while True:
            name = f"{prefix}__n{next(self.counter)}"
            if name not in self.taken:
                self.taken.add(name)
                return name


class _Normalizer:
    def __init__(self, vp: ValidatedProgram) -> None:
        self.vp = vp
        self.namer = _Namer(set(vp.arities) | set(vp.program.functions))
        self.rules: list[NormalRule] = []
        self.generated: dict[str, Rule] = {}

    def fresh_pred(self, source: Rule) -> str:
        name = self.namer.fresh(source.head.predicate)
        self.generated[name] = source
        return name

    def emit(self, kind: OperatorKind, head: Atom, body: Sequence[Atom],
             conditions: Sequence[Condition], source: Rule) -> None:
        self.rules.append(NormalRule(kind, head, tuple(body), tuple(conditions), source.span))

    # -- per predicate --------------------------------------------------

    def run(self) -> NormalProgram:
        program = self.vp.program
        recursive = _recursive_rules(program)
        for pred in program.head_predicates():
            rules = program.rules_for(pred)
            if len(rules) == 1:
                self.rule(rules[0], pred)
                continue
            ordered = [r for r in rules if r not in recursive] + [r for r in rules if r in recursive]
            operands: list[Atom] = []
            used: set[str] = set()
            for rule in ordered:
                if _union_shaped(rule) and rule.body[0].predicate not in used | {pred}:
                    operands.append(rule.body[0])
                else:
                    branch = self.fresh_pred(rule)
                    out = self.rule(rule, branch)
                    operands.append(Atom(branch, out))
                used.add(operands[-1].predicate)
            self.union_chain(pred, operands, ordered[0])
        groups: dict[str, list[NormalRule]] = {}
        for rule in self.rules:
            groups.setdefault(rule.head.predicate, []).append(rule)
        for rule in self.rules:
            found = classify(rule, groups[rule.head.predicate])
            assert found is rule.kind, f"built {rule.kind} but {rule} classifies as {found}"
        return NormalProgram(tuple(self.rules), self.generated, self.vp)

    def union_chain(self, pred: str, operands: list[Atom], source: Rule) -> None:
        acc = operands[0]
        for i, operand in enumerate(operands[1:], start=2):
            target = pred if i == len(operands) else self.fresh_pred(source)
            for op in (acc, operand):
                self.emit(OperatorKind.UNION, Atom(target, op.args), [op], [], source)
            acc = Atom(target, acc.args)

    # -- per rule -------------------------------------------------------

    def rule(self, rule: Rule, target: str, source: Rule | None = None) -> tuple[Variable, ...]:
        """Emit the normal rules defining ``target`` from ``rule``; return head variables.

        ``source`` is the user rule that generated names are attributed to.
        """
        source = source or rule
        taken = {v.name for v in rule.variables()}
        counter = itertools.count(1)

        def fresh_var() -> Variable:
            while True:
                name = f"V{next(counter)}"
                if name not in taken:
                    taken.add(name)
                    return Variable(name)

        pending: list[Condition] = []

        def rectify(args: Sequence[Term]) -> tuple[Variable, ...]:
            out: list[Variable] = []
            for term in args:
                if isinstance(term, Variable) and term not in out:
                    out.append(term)
                    continue
                v = fresh_var()
                pending.append(VarEq(term, v) if isinstance(term, Variable) else ConstEq(v, term))
                out.append(v)
            return tuple(out)

        positives = [(a.predicate, rectify(a.args)) for a in rule.positive_body]
        head_vars = rectify(rule.head.args)
        pending.extend(rule.conditions)
        negatives = [self.negated_operand(a, source) for a in rule.negative_body]

        steps: list[_Step] = []

        def push(step: _Step) -> tuple[_Ref, tuple[Variable, ...]]:
            steps.append(step)
            return len(steps) - 1, step.vars

        cur: tuple[_Ref, tuple[Variable, ...]] = positives[0]
        for ref, args in positives[1:]:
            if ref == cur[0]:
                ref = self.copy_of(ref, args, source)
            if args == cur[1]:
                kind, out = OperatorKind.INTERSECTION, args
            else:
                out = cur[1] + tuple(v for v in args if v not in cur[1])
                kind = OperatorKind.PRODUCT if set(args).isdisjoint(cur[1]) else OperatorKind.JOIN
            cur = push(_Step(kind, out, [(cur[0], cur[1], False), (ref, args, False)]))

        while pending or negatives:
            progressed = False
            bound = set(cur[1])
            ready = [c for c in pending if set(c.vars) <= bound]
            if ready:
                pending = [c for c in pending if c not in ready]
                cur = push(_Step(OperatorKind.SELECTION, cur[1], [(cur[0], cur[1], False)], tuple(ready)))
                progressed = True
            for neg in [n for n in negatives if set(n[1]) <= bound]:
                negatives.remove(neg)
                cur = self.difference(cur, neg, source, push)
                progressed = True
            bindings: list[Condition] = []
            new_vars: list[Variable] = []
            for cond in pending:
                v = _binds(cond, bound)
                if v is not None and v not in new_vars:
                    bindings.append(cond)
                    new_vars.append(v)
            if bindings:
                pending = [c for c in pending if c not in bindings]
                cur = push(_Step(OperatorKind.EXTENSION, cur[1] + tuple(new_vars),
                                 [(cur[0], cur[1], False)], tuple(bindings)))
                progressed = True
            if not progressed:
                raise AssertionError(f"cannot layer conditions of validated rule {rule}")

        if cur[1] != head_vars or isinstance(cur[0], str):
            cur = push(_Step(OperatorKind.PROJECTION, head_vars, [(cur[0], cur[1], False)]))

        names: dict[int, str] = {i: self.fresh_pred(source) for i in range(len(steps) - 1)}
        names[len(steps) - 1] = target
        for i, step in enumerate(steps):
            body = [Atom(names[r] if isinstance(r, int) else r, args, neg) for r, args, neg in step.body]
            self.emit(step.kind, Atom(names[i], step.vars), body, step.conditions, source)
        return head_vars

    def copy_of(self, pred: str, args: tuple[Variable, ...], rule: Rule) -> str:
        """Fresh renaming of ``pred``, avoiding a self join."""
        name = self.fresh_pred(rule)
        self.emit(OperatorKind.PROJECTION, Atom(name, args), [Atom(pred, args)], [], rule)
        return name

    def negated_operand(self, atom: Atom, rule: Rule) -> tuple[str, tuple[Variable, ...]]:
        """A predicate over the distinct variables of a negated atom."""
        if _distinct_vars(atom.args):
            return atom.predicate, atom.variables()
        helper = self.fresh_pred(rule)
        sub = Rule(Atom(helper, atom.variables()), (atom.positive(),), (), rule.span)
        return helper, self.rule(sub, helper, source=rule)

    def difference(self, cur, neg, rule, push):
        ref, args = neg
        if ref == cur[0]:
            ref = self.copy_of(ref, args, rule)
        if set(args) == set(cur[1]) and args != cur[1]:
            name = self.fresh_pred(rule)
            self.emit(OperatorKind.PROJECTION, Atom(name, cur[1]), [Atom(ref, args)], [], rule)
            ref, args = name, cur[1]
        if args != cur[1]:
            kind = OperatorKind.PRODUCT if not args else OperatorKind.JOIN
            ref, args = push(_Step(kind, cur[1], [(cur[0], cur[1], False), (ref, args, False)]))
        return push(_Step(OperatorKind.NEGATION, cur[1], [(cur[0], cur[1], False), (ref, args, True)]))


def _recursive_rules(program: Program) -> set[Rule]:
    """Rules with a body atom in the same dependency cycle as their head."""
    edges: dict[str, set[str]] = {}
    for rule in program.rules:
        edges.setdefault(rule.head.predicate, set()).update(a.predicate for a in rule.body)

    def reaches(src: str, dst: str) -> bool:
        stack, seen = [src], set()
        while stack:
            node = stack.pop()
            for nxt in edges.get(node, ()):
                if nxt == dst:
                    return True
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    return {r for r in program.rules
            if any(a.predicate == r.head.predicate or reaches(a.predicate, r.head.predicate)
                   for a in r.body)}


def normalize(program: Program | ValidatedProgram) -> NormalProgram:
    """Normal form of ``program``: one relational operator per rule."""
    vp = program if isinstance(program, ValidatedProgram) else validate(program)
    return _Normalizer(vp).run()
