from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import load
from schemalyze.depgraph import paths, query, to_dot, transitive_closure
from schemalyze.errors import UnknownQuery
from schemalyze.metafacts import extract
from schemalyze.normalizer import normalize
from schemalyze.parser import parse_program


def reachable_pairs(edges):
    """Independent oracle: BFS from every node over (to, from) edges."""
    succ: dict[str, set[str]] = {}
    for to, src in edges:
        succ.setdefault(to, set()).add(src)
    pairs = set()
    for start in succ:
        seen, stack = set(), [start]
        while stack:
            for nxt in succ.get(stack.pop(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        pairs |= {(start, n) for n in seen}
    return pairs


@given(st.sets(st.tuples(st.sampled_from("abcdefg"), st.sampled_from("abcdefg")), max_size=20))
def test_closure_matches_bfs(edges):
    assert transitive_closure(edges) == reachable_pairs(edges)


@pytest.fixture
def figure1():
    return extract(normalize(parse_program(load("figure1.dl"))))


def test_path_through_function(figure1):
    path = paths(figure1)
    assert ("b3", "b2") in path
    assert ("b3", "b1") in path
    assert ("b1", "b3") not in path


def test_base_changes(figure1):
    assert query(figure1, "base_changes", ["f1"]) == [("b3",)]
    assert query(figure1, "base_changes", ["nope"]) == []
    with pytest.raises(UnknownQuery):
        query(figure1, "base_changes")


def test_idb_func_pred(figure1):
    assert ("v3",) in query(figure1, "idb_func_pred")
    assert ("v1",) not in query(figure1, "idb_func_pred")


def test_tbl_dep(figure1):
    rows = query(figure1, "tbl_dep")
    assert ("b3", "b2") in rows and ("b3", "b1") in rows
    assert ("b2", "b3") not in rows


def test_tbl_dep_includes_self_pairs():
    mf = extract(normalize(parse_program(
        "base b(a). func f/1. func f writes b. v(X,Y) :- b(X), Y=f(X).")))
    assert query(mf, "tbl_dep") == [("b", "b")]


def test_attr_dups(figure1):
    rows = query(figure1, "attr_dups")
    assert ("b1", "b2", "name") in rows and ("b2", "b1", "name") in rows


def test_path_query_filters(figure1):
    assert query(figure1, "path", ["b3", "b2"]) == [("b3", "b2")]
    assert all(row[0] == "v3" for row in query(figure1, "path", ["v3"]))


def test_unknown_query(figure1):
    with pytest.raises(UnknownQuery):
        query(figure1, "nonsense")


def test_dot_output(figure1):
    dot = to_dot(figure1, frozenset({"v3__n1"}))
    assert dot.startswith("digraph schema {") and dot.endswith("}\n")
    assert '"b2" -> "t2";' in dot
    assert '"b1" [shape=box];' in dot
    assert '"f1" [shape=diamond];' in dot
    assert '"v3__n1" [shape=ellipse, style=dashed];' in dot
