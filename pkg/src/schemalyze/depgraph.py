"""Reachability over ``dep`` and the built-in schema queries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from schemalyze.errors import UnknownQuery
from schemalyze.metafacts import MetaFactBase


@dataclass(frozen=True)
class PathRelation:
    """Transitive closure of ``dep``; pairs are ``(to, from)`` like ``dep``."""

    closure: frozenset[tuple[str, str]]

    def __contains__(self, pair: object) -> bool:
        return pair in self.closure

    def sources(self, to: str) -> frozenset[str]:
        return frozenset(f for t, f in self.closure if t == to)

    def targets(self, source: str) -> frozenset[str]:
        return frozenset(t for t, f in self.closure if f == source)


def transitive_closure(edges: frozenset[tuple[str, str]] | set[tuple[str, str]]) -> frozenset[tuple[str, str]]:
    """Semi-naive closure of ``(to, from)`` pairs."""
    by_to: dict[str, set[str]] = {}
    for to, src in edges:
        by_to.setdefault(to, set()).add(src)
    closure = set(edges)
    delta = set(edges)
    while delta:
        new = set()
        # (a, b) new and b depends directly on c gives (a, c)
        for a, b in delta:
            for c in by_to.get(b, ()):
                if (a, c) not in closure:
                    new.add((a, c))
        closure |= new
        delta = new
    return frozenset(closure)


def paths(mf: MetaFactBase) -> PathRelation:
    return PathRelation(transitive_closure(mf.dep))


def _attr_dups(mf: MetaFactBase, path: PathRelation, args: Sequence[str]) -> set[tuple]:
    by_name: dict[str, set[str]] = {}
    for rel, _, name in mf.attr:
        by_name.setdefault(name, set()).add(rel)
    return {(r1, r2, n) for n, rels in by_name.items() for r1 in rels for r2 in rels if r1 != r2}


def _idb_func_pred(mf: MetaFactBase, path: PathRelation, args: Sequence[str]) -> set[tuple]:
    callers = {v for v, _, _, _ in mf.call}
    return {(v,) for v in mf.derived_preds if v in callers}


def _base_changes(mf: MetaFactBase, path: PathRelation, args: Sequence[str]) -> set[tuple]:
    if len(args) != 1:
        raise UnknownQuery("base_changes takes exactly one argument, the function name")
    (func,) = args
    if func not in mf.functions:
        return set()
    return {(b,) for b in mf.base_preds if (b, func) in path}


def _tbl_dep(mf: MetaFactBase, path: PathRelation, args: Sequence[str]) -> set[tuple]:
    rows = set()
    for f in mf.functions:
        for a in path.targets(f) & mf.base_preds:
            for b in path.sources(f) & mf.base_preds:
                rows.add((a, b))
    return rows


def _path(mf: MetaFactBase, path: PathRelation, args: Sequence[str]) -> set[tuple]:
    if len(args) > 2:
        raise UnknownQuery("path takes at most two arguments, to and from")
    return {row for row in path.closure if all(a == v for a, v in zip(args, row))}


QUERIES: dict[str, Callable[[MetaFactBase, PathRelation, Sequence[str]], set[tuple]]] = {
    "attr_dups": _attr_dups,
    "idb_func_pred": _idb_func_pred,
    "base_changes": _base_changes,
    "tbl_dep": _tbl_dep,
    "path": _path,
}


def query(mf: MetaFactBase, name: str, args: Sequence[str] = (),
          path: PathRelation | None = None) -> list[tuple]:
    """Rows of a built-in query, sorted lexicographically.

    ``attr_dups`` lists reused attribute names, ``idb_func_pred`` the views
    calling a function, ``base_changes F`` the base tables reachable from
    function F, ``tbl_dep`` pairs of base tables linked through a function
    (rows with A = B included) and ``path [TO [FROM]]`` the closure itself.
    """
    if name not in QUERIES:
        raise UnknownQuery(f"unknown query {name!r}; expected one of {', '.join(sorted(QUERIES))}")
    return sorted(QUERIES[name](mf, path or paths(mf), tuple(args)))


def _quote(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(mf: MetaFactBase, generated: frozenset[str] = frozenset()) -> str:
    """The dependency graph in DOT syntax, edges pointing from source to dependent."""
    shapes: dict[str, str] = {}
    for p in mf.base_preds:
        shapes[p] = "shape=box"
    for p in mf.derived_preds:
        shapes[p] = "shape=ellipse, style=dashed" if p in generated else "shape=ellipse"
    for f in mf.functions:
        shapes[f] = "shape=diamond"
    nodes = set(shapes) | {n for edge in mf.dep for n in edge}
    lines = ["digraph schema {", "  rankdir=LR;"]
    for node in sorted(nodes):
        attrs = shapes.get(node, "shape=plaintext")
        lines.append(f"  {_quote(node)} [{attrs}];")
    labels = {(h, b): k.value for h, b, k in mf.rel}
    for to, src in sorted(mf.dep):
        label = f' [label="{labels[(to, src)]}"]' if (to, src) in labels else ""
        lines.append(f"  {_quote(src)} -> {_quote(to)}{label};")
    lines.append("}")
    return "\n".join(lines) + "\n"
