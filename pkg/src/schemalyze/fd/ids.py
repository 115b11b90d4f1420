"""FD identifiers and the FD record itself.

An identifier is a small tree: a node per base FD (or function) whose
children are column leaves, constant leaves, or further nodes substituted
in by transitivity. Two FDs with equal identifiers share their history,
which is what the union and recursion rules test for.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from schemalyze.errors import DepthCapExceeded, UnmappedColumn
from schemalyze.ir import render_literal

DEFAULT_DEPTH_CAP = 16


@dataclass(frozen=True)
class Col:
    position: int

    def __str__(self) -> str:
        return str(self.position)


@dataclass(frozen=True)
class ConstLeaf:
    value: str | int | float

    def __str__(self) -> str:
        if isinstance(self.value, str):
            return render_literal(self.value)
        return f"'{self.value!r}'"


@dataclass(frozen=True)
class BaseNode:
    fd_id: str
    children: tuple[IdTerm, ...] = ()
    # Derived values, computed once: identifiers can share large subtrees.
    depth: int = field(default=0, init=False, compare=False, repr=False)
    columns: frozenset = field(default=frozenset(), init=False, compare=False, repr=False)
    _hash: int = field(default=0, init=False, compare=False, repr=False)
    _text: list = field(default_factory=list, init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "depth", 1 + max((depth(c) for c in self.children), default=0))
        object.__setattr__(self, "columns", frozenset().union(*(columns(c) for c in self.children)))
        object.__setattr__(self, "_hash", hash((self.fd_id, self.children)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, BaseNode):
            return NotImplemented
        return (self._hash == other._hash and self.fd_id == other.fd_id
                and self.children == other.children)

    def __str__(self) -> str:
        if not self._text:
            self._text.append(f"{self.fd_id}[{','.join(map(str, self.children))}]")
        return self._text[0]


IdTerm = Union[BaseNode, Col, ConstLeaf]


def depth(term: IdTerm) -> int:
    """Nesting depth: leaves are 0, a node is one more than its deepest child."""
    return term.depth if isinstance(term, BaseNode) else 0


def columns(term: IdTerm) -> frozenset[int]:
    """Column numbers occurring as leaves of ``term``."""
    if isinstance(term, Col):
        return frozenset((term.position,))
    return term.columns if isinstance(term, BaseNode) else frozenset()


def has_base_node(term: IdTerm) -> bool:
    return isinstance(term, BaseNode)


def node_ids(term: IdTerm | None) -> set[str]:
    """Every fd/function name occurring in ``term``."""
    if not isinstance(term, BaseNode):
        return set()
    found = {term.fd_id}
    for child in term.children:
        found |= node_ids(child)
    return found


def remap_id(term: IdTerm, mapping: Mapping[int, int]) -> IdTerm:
    """Rename column leaves through ``mapping`` (body position to head position)."""
    if isinstance(term, Col):
        if term.position not in mapping:
            raise UnmappedColumn(f"column {term.position} has no image")
        return Col(mapping[term.position])
    if isinstance(term, BaseNode):
        children = tuple(remap_id(c, mapping) for c in term.children)
        if children == term.children:
            return term
        return BaseNode(term.fd_id, children)
    return term


def _replace(term: IdTerm, column: int, sub: IdTerm) -> IdTerm:
    if isinstance(term, Col):
        return sub if term.position == column else term
    if isinstance(term, BaseNode) and column in term.columns:
        return BaseNode(term.fd_id, tuple(_replace(c, column, sub) for c in term.children))
    return term


def replace_in_id(term: IdTerm, column: int, sub: IdTerm, cap: int = DEFAULT_DEPTH_CAP) -> IdTerm:
    """Substitute ``sub`` for every ``Col(column)`` leaf of ``term``."""
    result = _replace(term, column, sub)
    if depth(result) > cap:
        raise DepthCapExceeded(f"identifier rooted at {result.fd_id} nests deeper than {cap}")  # type: ignore[union-attr]
    return result


def id_to_json(term: IdTerm) -> dict:
    if isinstance(term, Col):
        return {"col": term.position}
    if isinstance(term, ConstLeaf):
        return {"const": term.value}
    return {"fd": term.fd_id, "children": [id_to_json(c) for c in term.children]}


def id_from_json(data: Mapping) -> IdTerm:
    if "col" in data:
        return Col(int(data["col"]))
    if "const" in data:
        return ConstLeaf(data["const"])
    return BaseNode(str(data["fd"]), tuple(id_from_json(c) for c in data.get("children", ())))


@dataclass(frozen=True)
class Fd:
    """``lhs -> rhs`` on ``pred`` (1-based columns), tagged with its identifier."""

    pred: str
    lhs: frozenset[int]
    rhs: int
    id: IdTerm

    def __post_init__(self) -> None:
        if self.rhs in self.lhs:
            raise ValueError(f"fd on {self.pred}: {self.rhs} occurs on both sides")

    @property
    def triple(self) -> tuple[str, frozenset[int], int]:
        return (self.pred, self.lhs, self.rhs)

    def sort_key(self) -> tuple:
        return (self.pred, len(self.lhs), sorted(self.lhs), self.rhs, str(self.id))

    def render(self, show_id: bool = True, name: str = "fd") -> str:
        lhs = "{" + ",".join(map(str, sorted(self.lhs))) + "}"
        if show_id:
            return f"{name}({self.pred},{lhs},{self.rhs},{self.id})."
        return f"{name}({self.pred},{lhs},{self.rhs})."

    def __str__(self) -> str:
        return self.render()

    def to_json(self) -> dict:
        return {"pred": self.pred, "lhs": sorted(self.lhs), "rhs": self.rhs, "id": id_to_json(self.id)}


def sorted_fds(fds: Iterable[Fd]) -> list[Fd]:
    return sorted(fds, key=Fd.sort_key)
