"""Meta-facts describing a normalized schema.

Every relation is a set of plain tuples so the fact base can be queried,
compared and serialized without custom traversal. Edges in ``dep`` are
stored as ``(to, from)``: the first component depends on the second.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import TYPE_CHECKING, Iterable

from schemalyze.errors import NonLinearRecursion
from schemalyze.graphs import is_cyclic, strongly_connected_components
from schemalyze.ir import ConstEq, FuncEq, Variable, VarEq, render_literal
from schemalyze.normalizer import NormalProgram, NormalRule, OperatorKind

if TYPE_CHECKING:
    from schemalyze.fd.ids import Fd

# Columns holding literal values (quoted in text output), per relation.
_LITERAL_COLUMNS = {"const": 2, "attr": 2, "ftype": 1}


@dataclass(frozen=True)
class MetaFactBase:
    rel: frozenset[tuple[str, str, OperatorKind]] = frozenset()
    pos: frozenset[tuple[str, str, int, int]] = frozenset()
    eq: frozenset[tuple[str, int, int]] = frozenset()
    const: frozenset[tuple[str, int, object]] = frozenset()
    rec: frozenset[tuple[str, str, str]] = frozenset()
    dep: frozenset[tuple[str, str]] = frozenset()
    base: frozenset[tuple[str, int]] = frozenset()
    derived: frozenset[tuple[str, int]] = frozenset()
    attr: frozenset[tuple[str, int, str]] = frozenset()
    func: frozenset[tuple[str, int]] = frozenset()
    call: frozenset[tuple[str, frozenset[int], int, str]] = frozenset()
    ftype: frozenset[tuple[str, str]] = frozenset()

    @property
    def base_preds(self) -> frozenset[str]:
        return frozenset(p for p, _ in self.base)

    @property
    def derived_preds(self) -> frozenset[str]:
        return frozenset(p for p, _ in self.derived)

    @property
    def functions(self) -> frozenset[str]:
        return frozenset(f for f, _ in self.func)

    def relations(self) -> dict[str, list[tuple]]:
        """Each relation as a sorted list of rows."""
        return {f.name: sorted(getattr(self, f.name), key=_row_key) for f in fields(self)}

    def to_json(self) -> dict[str, list[list]]:
        return {name: [[_json_value(v) for v in row] for row in rows]
                for name, rows in self.relations().items()}

    def render(self) -> str:
        """All facts as Datalog text, one per line, grouped by relation."""
        lines = []
        for name, rows in self.relations().items():
            literal = _LITERAL_COLUMNS.get(name)
            for row in rows:
                parts = [render_literal(v) if i == literal else _text_value(v)  # type: ignore[arg-type]
                         for i, v in enumerate(row)]
                lines.append(f"{name}({','.join(parts)}).")
        return "".join(line + "\n" for line in lines)


def _row_key(row: tuple) -> tuple:
    return tuple(_sort_value(v) for v in row)


def _sort_value(value: object) -> tuple:
    if isinstance(value, frozenset):
        return (2, len(value), tuple(sorted(value)))
    if isinstance(value, str):
        return (1, value)
    return (0, value)


def _json_value(value: object) -> object:
    if isinstance(value, frozenset):
        return sorted(value)
    if isinstance(value, OperatorKind):
        return value.value
    return value


def _text_value(value: object) -> str:
    if isinstance(value, frozenset):
        return "{" + ",".join(map(str, sorted(value))) + "}"
    if isinstance(value, OperatorKind):
        return value.value
    if isinstance(value, str):
        return value
    return str(value)


class _Extractor:
    def __init__(self, np: NormalProgram) -> None:
        self.np = np
        self.rel: set = set()
        self.pos: set = set()
        self.eq: set = set()
        self.const: set = set()
        self.dep: set = set()
        self.call: set = set()
        self.func: dict[str, int] = {}

    def owner(self, pred: str) -> str:
        """The user-visible predicate a generated one was split off from."""
        source = self.np.generated.get(pred)
        return source.head.predicate if source is not None else pred

    def rule(self, rule: NormalRule) -> None:
        head = rule.head.predicate
        where = {v: i for i, v in enumerate(rule.head.args, start=1)}
        for atom in rule.body:
            self.dep.add((head, atom.predicate))
            if not atom.negated:
                self.rel.add((head, atom.predicate, rule.kind))
        if rule.kind in (OperatorKind.PROJECTION, OperatorKind.PRODUCT, OperatorKind.JOIN):
            for atom in rule.body:
                for j, var in enumerate(atom.args, start=1):
                    if var in where:
                        self.pos.add((head, atom.predicate, where[var], j))
        for cond in rule.conditions:
            if isinstance(cond, VarEq):
                self.eq.add((head, where[cond.left], where[cond.right]))
            elif isinstance(cond, ConstEq):
                self.const.add((head, where[cond.var], cond.value.value))
            elif isinstance(cond, FuncEq):
                self.func.setdefault(cond.function, len(cond.args))
                inputs = frozenset(where[v] for v in cond.inputs)
                out = where[cond.var]
                if out not in inputs:
                    self.call.add((head, inputs, out, cond.function))
                self.dep.add((cond.function, self.owner(head)))


def _rec_facts(np: NormalProgram, rel: Iterable[tuple[str, str, OperatorKind]]) -> set[tuple[str, str, str]]:
    edges: dict[str, set[str]] = {}
    for head, body, _ in rel:
        edges.setdefault(head, set()).add(body)
    nodes = set(edges) | {b for bs in edges.values() for b in bs}
    rules_by_head: dict[str, list[NormalRule]] = {}
    for rule in np.rules:
        rules_by_head.setdefault(rule.head.predicate, []).append(rule)
    facts = set()
    for component in strongly_connected_components(nodes, edges):
        if not is_cyclic(component, edges):
            continue
        members = set(component)
        unions = sorted(p for p in members
                        if any(r.kind is OperatorKind.UNION for r in rules_by_head.get(p, ())))
        if len(unions) > 1:
            raise NonLinearRecursion(
                f"recursive component {{{', '.join(component)}}} has {len(unions)} unions; "
                "only one recursive union (linear recursion) is supported")
        for pred in component:
            for rule in rules_by_head.get(pred, ()):
                inside = [a for a in rule.body if not a.negated and a.predicate in members]
                if rule.kind is not OperatorKind.UNION and len(inside) > 1:
                    raise NonLinearRecursion(
                        f"rule {rule} refers to its recursive component more than once", rule.origin)
        if not unions:
            continue
        (head,) = unions
        operands = [r.body[0].predicate for r in rules_by_head[head]]
        inside = [p for p in operands if p in members]
        if len(inside) != 1:
            raise NonLinearRecursion(f"both operands of recursive union {head} are recursive")
        (rec_branch,) = inside
        (base_branch,) = [p for p in operands if p not in members]
        facts.add((head, base_branch, rec_branch))
    return facts


def extract(np: NormalProgram) -> MetaFactBase:
    """Extract the meta-fact base of a normalized program."""
    program = np.source.program
    arities = np.arities
    ex = _Extractor(np)
    for rule in np.rules:
        ex.rule(rule)

    for fdecl in program.func_decls:
        ex.func[fdecl.name] = fdecl.arity
    for call in program.call_decls:
        ex.func.setdefault(call.function, len(call.inputs))
        ex.call.add((call.view, frozenset(call.inputs), call.output, call.function))
        ex.dep.add((call.function, call.view))
    for w in program.writes_decls:
        ex.func.setdefault(w.function, 0)
        ex.dep.add((w.table, w.function))
    for d in program.dep_decls:
        ex.dep.add((d.target, d.source))

    base_preds = np.source.base_predicates
    derived_preds = {r.head.predicate for r in np.rules}
    attr = set()
    for decl in program.base_decls:
        attr.update((decl.predicate, i, name) for i, name in enumerate(decl.attributes, start=1))
    for pred in program.head_predicates():
        for i, term in enumerate(program.rules_for(pred)[0].head.args, start=1):
            name = term.name.lower() if isinstance(term, Variable) else f"col{i}"
            attr.add((pred, i, name))

    return MetaFactBase(
        rel=frozenset(ex.rel),
        pos=frozenset(ex.pos),
        eq=frozenset(ex.eq),
        const=frozenset(ex.const),
        rec=frozenset(_rec_facts(np, ex.rel)),
        dep=frozenset(ex.dep),
        base=frozenset((p, arities[p]) for p in base_preds),
        derived=frozenset((p, arities[p]) for p in derived_preds),
        attr=frozenset(attr),
        func=frozenset(ex.func.items()),
        call=frozenset(ex.call),
        ftype=frozenset((d.function, d.ftype) for d in program.ftype_decls),
    )


def fd_seeds(np: NormalProgram) -> list[Fd]:
    """One FD per declaration, identified ``id1, id2, ...`` in declaration order."""
    from schemalyze.fd.ids import BaseNode, Col, Fd

    return [Fd(d.predicate, frozenset(d.lhs), d.rhs,
               BaseNode(f"id{i}", tuple(Col(a) for a in sorted(d.lhs))))
            for i, d in enumerate(np.source.program.fd_decls, start=1)]


def declared_call_functions(np: NormalProgram) -> frozenset[str]:
    """Functions whose FDs are asserted by ``call`` declarations rather than rules."""
    return frozenset(c.function for c in np.source.program.call_decls)
