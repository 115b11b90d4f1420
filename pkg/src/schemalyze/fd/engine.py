"""Saturation of functional dependencies over a meta-fact base.

Each ``step_*`` function is one family of propagation rules. They take the
current FDs and, optionally, a ``delta`` of newly found FDs; with a delta
only derivations using at least one new premise are produced, which is
what the semi-naive loop in :func:`saturate` needs.

Recursion is handled with potential FDs: the FDs of the base branch are
assumed for the recursive predicate, propagated around the cycle, and
promoted to real FDs only if they come back unchanged. Assumptions that
do not come back are withdrawn and the rest re-checked, so no promoted FD
rests on a withdrawn one.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from schemalyze.errors import DepthCapExceeded, UnmappedColumn
from schemalyze.fd.ids import (
    DEFAULT_DEPTH_CAP,
    BaseNode,
    Col,
    ConstLeaf,
    Fd,
    has_base_node,
    remap_id,
    replace_in_id,
    sorted_fds,
)
from schemalyze.depgraph import PathRelation, paths
from schemalyze.graphs import strongly_connected_components
from schemalyze.metafacts import MetaFactBase
from schemalyze.normalizer import POSITION_MAPPED, POSITION_PRESERVING, OperatorKind

CONST_ID_MODES = ("value", "column")


@dataclass(frozen=True)
class TransSet:
    """Predicates where the transitivity and equate rules may fire."""

    preds: frozenset[str]

    def __contains__(self, pred: object) -> bool:
        return pred in self.preds


def trans_set(mf: MetaFactBase) -> TransSet:
    """Base tables, join heads, predicates with eq/const facts, and call sites."""
    preds = set(mf.base_preds)
    preds |= {h for h, _, op in mf.rel if op is OperatorKind.JOIN}
    preds |= {r for r, _, _ in mf.eq}
    preds |= {r for r, _, _ in mf.const}
    preds |= {v for v, _, _, _ in mf.call}
    return TransSet(frozenset(preds))


@dataclass(frozen=True)
class FdSet:
    facts: frozenset[Fd] = frozenset()
    potential: frozenset[Fd] = frozenset()
    diagnostics: tuple[str, ...] = ()

    def on(self, pred: str) -> list[Fd]:
        return sorted_fds(f for f in self.facts if f.pred == pred)

    def triples(self) -> frozenset[tuple[str, frozenset[int], int]]:
        return frozenset(f.triple for f in self.facts)

    def to_json(self, show_ids: bool = True) -> dict:
        def rows(fds: Iterable[Fd]) -> list[dict]:
            if show_ids:
                return [f.to_json() for f in sorted_fds(fds)]
            seen = sorted({(f.pred, tuple(sorted(f.lhs)), f.rhs) for f in fds},
                          key=lambda t: (t[0], len(t[1]), t[1], t[2]))
            return [{"pred": p, "lhs": list(lhs), "rhs": rhs} for p, lhs, rhs in seen]
        return {"fds": rows(self.facts), "potential": rows(self.potential),
                "diagnostics": list(self.diagnostics)}

    def render(self, show_ids: bool = False) -> str:
        lines = []
        for fds, name in ((self.facts, "fd"), (self.potential, "pfd")):
            seen: set[str] = set()
            for f in sorted_fds(fds):
                line = f.render(show_ids, name)
                if line not in seen:
                    seen.add(line)
                    lines.append(line)
        lines += [f"% {d}" for d in self.diagnostics]
        return "".join(line + "\n" for line in lines)


class _Index:
    """Per-fact-base lookups shared by the steps."""

    def __init__(self, mf: MetaFactBase) -> None:
        self.heads: dict[str, list[tuple[str, OperatorKind]]] = defaultdict(list)
        for head, body, op in sorted(mf.rel):
            self.heads[body].append((head, op))
        self.posmap: dict[tuple[str, str], dict[int, int]] = defaultdict(dict)
        for head, body, hpos, bpos in mf.pos:
            self.posmap[(head, body)][bpos] = hpos
        self.union_operands: dict[str, list[str]] = defaultdict(list)
        for head, body, op in sorted(mf.rel):
            if op is OperatorKind.UNION:
                self.union_operands[head].append(body)


_INDEX_CACHE: dict[int, tuple[MetaFactBase, _Index]] = {}


def _index(mf: MetaFactBase) -> _Index:
    cached = _INDEX_CACHE.get(id(mf))
    if cached is None or cached[0] is not mf:
        if len(_INDEX_CACHE) > 64:
            _INDEX_CACHE.clear()
        cached = (mf, _Index(mf))
        _INDEX_CACHE[id(mf)] = cached
    return cached[1]


def _by_pred(fds: Iterable[Fd]) -> dict[str, list[Fd]]:
    out: dict[str, list[Fd]] = defaultdict(list)
    for f in fds:
        out[f.pred].append(f)
    return out


# -- rule families -----------------------------------------------------------


def step_position_preserving(fds: Iterable[Fd], mf: MetaFactBase) -> set[Fd]:
    """FDs pass unchanged through selection, extension, intersection and the minuend of a negation."""
    idx = _index(mf)
    return {Fd(head, f.lhs, f.rhs, f.id)
            for f in fds for head, op in idx.heads.get(f.pred, ()) if op in POSITION_PRESERVING}


def step_position_mapped(fds: Iterable[Fd], mf: MetaFactBase) -> set[Fd]:
    """FDs pass through projection, product and join with columns renumbered.

    An FD is dropped when one of its columns does not reach the head.
    """
    idx = _index(mf)
    out = set()
    for f in fds:
        for head, op in idx.heads.get(f.pred, ()):
            if op not in POSITION_MAPPED:
                continue
            mapping = idx.posmap.get((head, f.pred), {})
            if f.rhs not in mapping or any(a not in mapping for a in f.lhs):
                continue
            try:
                new_id = remap_id(f.id, mapping)
            except UnmappedColumn:
                continue
            out.add(Fd(head, frozenset(mapping[a] for a in f.lhs), mapping[f.rhs], new_id))
    return out


def step_constraint_fds(mf: MetaFactBase, const_id_mode: str = "value") -> set[Fd]:
    """FDs stated by equality and constant conditions."""
    if const_id_mode not in CONST_ID_MODES:
        raise ValueError(f"const_id_mode must be one of {CONST_ID_MODES}")
    out = set()
    for r, i, j in mf.eq:
        if i != j:
            out.add(Fd(r, frozenset({i}), j, Col(i)))
            out.add(Fd(r, frozenset({j}), i, Col(j)))
    for r, i, v in mf.const:
        out.add(Fd(r, frozenset(), i, ConstLeaf(v if const_id_mode == "value" else i)))
    return out


def step_udf(mf: MetaFactBase) -> set[Fd]:
    """A function's output column is determined by its input columns."""
    return {Fd(v, inputs, out, BaseNode(func, tuple(Col(i) for i in sorted(inputs))))
            for v, inputs, out, func in mf.call if out not in inputs}


def step_transitive(fds: Iterable[Fd], trans: TransSet, delta: Iterable[Fd] | None = None,
                    depth_cap: int = DEFAULT_DEPTH_CAP, diagnostics: set[str] | None = None) -> set[Fd]:
    """Extended transitivity: ``a -> B`` and ``g -> D`` with B in g, D not in a give ``a + (g - B) -> D``."""
    fds = list(fds)
    by_rhs: dict[tuple[str, int], list[Fd]] = defaultdict(list)
    by_lhs_col: dict[tuple[str, int], list[Fd]] = defaultdict(list)
    for f in fds:
        if f.pred in trans:
            by_rhs[(f.pred, f.rhs)].append(f)
            for a in f.lhs:
                by_lhs_col[(f.pred, a)].append(f)
    out = set()

    def combine(f: Fd, g: Fd) -> None:
        if g.rhs in f.lhs:
            return
        try:
            new_id = replace_in_id(g.id, f.rhs, f.id, depth_cap)
        except DepthCapExceeded as exc:
            if diagnostics is not None:
                lhs = ",".join(map(str, sorted(f.lhs | (g.lhs - {f.rhs}))))
                diagnostics.add(f"{f.pred}: {{{lhs}}} -> {g.rhs} dropped, {exc.message}")
            return
        out.add(Fd(f.pred, f.lhs | (g.lhs - {f.rhs}), g.rhs, new_id))

    for d in (fds if delta is None else delta):
        if d.pred not in trans:
            continue
        for g in by_lhs_col.get((d.pred, d.rhs), ()):
            combine(d, g)
        for a in d.lhs:
            for f in by_rhs.get((d.pred, a), ()):
                combine(f, d)
    return out


def step_equate_rhs(fds: Iterable[Fd], trans: TransSet, delta: Iterable[Fd] | None = None) -> set[Fd]:
    """Two FDs with the same left side and identifier make their right sides equal."""
    groups: dict[tuple, set[int]] = defaultdict(set)
    for f in fds:
        if f.pred in trans:
            groups[(f.pred, f.lhs, f.id)].add(f.rhs)
    keys = groups if delta is None else {(d.pred, d.lhs, d.id) for d in delta if d.pred in trans}
    out = set()
    for key in keys:
        rhs = groups.get(key, set())
        for x in rhs:
            for y in rhs:
                if x != y:
                    out.add(Fd(key[0], frozenset({x}), y, Col(x)))
    return out


def _common_origin(p1: str, p2: str, path: PathRelation) -> bool:
    return bool(path.sources(p1) & path.sources(p2))


def step_union(fds: Iterable[Fd], mf: MetaFactBase, path: PathRelation | None = None,
               delta: Iterable[Fd] | None = None) -> set[Fd]:
    """An FD present with one identifier on both union operands holds on the union.

    Identifiers containing a base-FD node also need the operands to share an
    upstream predicate; pure column/constant identifiers do not.
    """
    idx = _index(mf)
    present = set(fds)
    pending = present if delta is None else set(delta)
    operand_of: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for head, ops in idx.union_operands.items():
        if len(ops) == 2 and ops[0] != ops[1]:
            operand_of[ops[0]].append((head, ops[1]))
            operand_of[ops[1]].append((head, ops[0]))
    out = set()
    origin_cache: dict[tuple[str, str], bool] = {}
    for f in pending:
        for head, other in operand_of.get(f.pred, ()):
            if Fd(other, f.lhs, f.rhs, f.id) not in present:
                continue
            if has_base_node(f.id):
                key = tuple(sorted((f.pred, other)))
                if key not in origin_cache:
                    origin_cache[key] = _common_origin(key[0], key[1], path or paths(mf))
                if not origin_cache[key]:
                    continue
            out.add(Fd(head, f.lhs, f.rhs, f.id))
    return out


def step_recursion(fds: Iterable[Fd], potential: Iterable[Fd], mf: MetaFactBase) -> tuple[set[Fd], set[Fd]]:
    """Seed potential FDs and promote the ones that survive.

    Returns ``(seeds, promoted)``: for every ``rec(P, Q, R)``, the FDs of Q
    restated for P, and the FDs of Q whose identical copy reached R among
    ``potential`` (or real) FDs, restated for P.
    """
    real = set(fds)
    known = real | set(potential)
    seeds, promoted = set(), set()
    for p, q, r in mf.rec:
        for f in real:
            if f.pred != q:
                continue
            seeds.add(Fd(p, f.lhs, f.rhs, f.id))
            if Fd(r, f.lhs, f.rhs, f.id) in known:
                promoted.add(Fd(p, f.lhs, f.rhs, f.id))
    return seeds, promoted


# -- saturation -------------------------------------------------------------


@dataclass
class _Saturator:
    mf: MetaFactBase
    depth_cap: int
    max_ids: int
    trans: TransSet = field(init=False)
    path: PathRelation = field(init=False)
    diagnostics: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.trans = trans_set(self.mf)
        self.path = paths(self.mf)

    def derive(self, store: set[Fd], delta: set[Fd]) -> set[Fd]:
        new = step_position_preserving(delta, self.mf)
        new |= step_position_mapped(delta, self.mf)
        new |= step_transitive(store, self.trans, delta, self.depth_cap, self.diagnostics)
        new |= step_equate_rhs(store, self.trans, delta)
        new |= step_union(store, self.mf, self.path, delta)
        return new

    def closure(self, store: set[Fd], delta: set[Fd], allowed: frozenset[str] | None = None) -> set[Fd]:
        store = set(store)
        counts: dict[tuple, int] = defaultdict(int)
        for f in store:
            counts[f.triple] += 1
        delta = set(delta)
        while delta:
            fresh = []
            for f in sorted_fds(self.derive(store, delta)):
                if f in store or (allowed is not None and f.pred not in allowed):
                    continue
                if counts[f.triple] >= self.max_ids:
                    self.diagnostics.add(
                        f"{f.pred}: more than {self.max_ids} identifiers for "
                        f"{{{','.join(map(str, sorted(f.lhs)))}}} -> {f.rhs}; extra ones dropped")
                    continue
                counts[f.triple] += 1
                store.add(f)
                fresh.append(f)
            delta = set(fresh)
        return store

    def recursive_components(self) -> dict[str, frozenset[str]]:
        edges: dict[str, set[str]] = defaultdict(set)
        for head, body, _ in self.mf.rel:
            edges[head].add(body)
        nodes = set(edges) | {b for bs in edges.values() for b in bs}
        member_of = {}
        for component in strongly_connected_components(nodes, edges):
            for pred in component:
                member_of[pred] = frozenset(component)
        return {p: member_of[p] for p, _, _ in self.mf.rec}

    def run(self, seeds: Iterable[Fd], const_id_mode: str) -> FdSet:
        initial = set(seeds) | step_constraint_fds(self.mf, const_id_mode) | step_udf(self.mf)
        real = self.closure(initial, initial)
        components = self.recursive_components()
        potential: set[Fd] = set()
        while True:
            promoted: set[Fd] = set()
            for p, q, r in sorted(self.mf.rec):
                assumed = {Fd(p, f.lhs, f.rhs, f.id) for f in real if f.pred == q}
                allowed = components[p] - {p}
                first = True
                while assumed:
                    reached = self.closure(real | assumed, assumed, allowed)
                    if first:
                        potential |= assumed | (reached - real)
                        first = False
                    _, survivors = step_recursion(
                        {Fd(q, f.lhs, f.rhs, f.id) for f in assumed}, reached, _only_rec(p, q, r))
                    if survivors == assumed:
                        break
                    assumed = survivors
                promoted |= assumed - real
            if not promoted:
                break
            real = self.closure(real | promoted, promoted)
        return FdSet(frozenset(real), frozenset(potential), tuple(sorted(self.diagnostics)))


def _only_rec(p: str, q: str, r: str) -> MetaFactBase:
    return MetaFactBase(rec=frozenset({(p, q, r)}))


def saturate(mf: MetaFactBase, seeds: Iterable[Fd] | FdSet = (), depth_cap: int = DEFAULT_DEPTH_CAP,
             const_id_mode: str = "value", max_ids_per_fd: int = 16) -> FdSet:
    """Least fixpoint of all propagation rules starting from ``seeds``.

    Constant-condition FDs are identified by the constant (``value``) or by
    the column number (``column``). Derivations whose identifier would nest
    deeper than ``depth_cap``, or that would add more than ``max_ids_per_fd``
    identifiers to one (pred, lhs, rhs), are dropped and reported in
    ``diagnostics``.
    """
    if depth_cap < 1:
        raise ValueError("depth cap must be at least 1")
    if isinstance(seeds, FdSet):
        seeds = seeds.facts
    return _Saturator(mf, depth_cap, max_ids_per_fd).run(seeds, const_id_mode)
