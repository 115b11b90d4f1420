from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load, pipeline
from schemalyze.errors import DepthCapExceeded, UnmappedColumn
from schemalyze.fd import (
    BaseNode,
    Col,
    ConstLeaf,
    Fd,
    remap_id,
    replace_in_id,
    saturate,
    step_constraint_fds,
    step_equate_rhs,
    step_position_mapped,
    step_recursion,
    step_transitive,
    step_udf,
    trans_set,
)
from schemalyze.fd.ids import id_from_json, id_to_json
from schemalyze.ir import validate
from schemalyze.metafacts import MetaFactBase, extract, fd_seeds
from schemalyze.normalizer import OperatorKind, normalize
from schemalyze.oracle import soundness_sweep
from schemalyze.randprog import random_program

# Example 3 of the source text, with its constant leaf printed as '3'.
EXAMPLE3_TABLE = """
fd(s,{1},2,id1[1]).
fd(t,{1,2},3,id2[1,2]).
fd(r,{1},2,id1[1]).
fd(r,{2,3},4,id2[2,3]).
fd(r,{1,3},4,id2[id1[1],3]).
fd(q,{1},2,id1[1]).
fd(q,{2,3},4,id2[2,3]).
fd(q,{1,3},4,id2[id1[1],3]).
fd(q,{},3,'3').
fd(q,{2},4,id2[2,'3']).
fd(q,{1},4,id2[id1[1],'3']).
fd(p,{1},2,id2[id1[1],'3']).
"""

# Ancestor example: generated p__n1..p__n3 are p1..p3 there.
ANCESTOR_PFDS = """
pfd(p,{1},2,id1[1]).
pfd(p,{2},3,2).
pfd(p,{3},2,3).
pfd(p,{1},3,id1[1]).
pfd(p__n3,{1},2,id1[1]).
pfd(p__n3,{2},3,2).
pfd(p__n3,{3},2,3).
pfd(p__n3,{1},3,id1[1]).
pfd(p__n3,{2},4,id1[2]).
pfd(p__n3,{1},4,id1[id1[1]]).
pfd(p__n2,{1},2,id1[1]).
pfd(p__n2,{2},3,id1[2]).
pfd(p__n2,{1},3,id1[id1[1]]).
"""


def lines(text: str) -> set[str]:
    return {line for line in text.strip().splitlines() if line}


def rendered(fds, name="fd") -> set[str]:
    return {f.render(True, name) for f in fds}


def test_example3_column_mode_reproduces_table():
    _, _, fds = pipeline(load("example2.dl"), const_id_mode="column")
    assert rendered(fds.facts) == lines(EXAMPLE3_TABLE)


def test_example3_value_mode_uses_the_constant():
    _, _, fds = pipeline(load("example2.dl"))
    assert rendered(fds.facts) == lines(EXAMPLE3_TABLE.replace("'3'", "'2'"))


def test_ancestor_promotes_only_child_parent():
    _, _, fds = pipeline(load("ancestor.dl"))
    assert rendered(fds.on("p")) == {"fd(p,{1},2,id1[1])."}
    assert rendered(fds.potential, "pfd") == lines(ANCESTOR_PFDS)
    # the doubly nested identifier changed around the cycle, so it stays potential
    assert Fd("p__n2", frozenset({1}), 3, BaseNode("id1", (BaseNode("id1", (Col(1),)),))) not in fds.facts


def test_students_union_drops_fd_from_unrelated_tables():
    _, _, fds = pipeline(load("students.dl"))
    assert fds.on("students") == []


def test_students_union_keeps_fd_from_shared_table():
    _, _, fds = pipeline(load("students_shared.dl"))
    assert rendered(fds.on("students")) == {"fd(students,{1},2,id1[1])."}


def test_union_with_same_base_but_different_history():
    text = """base b(x,y,z). fd b: {1} -> 2.
    v1(X,Y) :- b(X,Y,Z).
    w(X,Z,Y) :- b(X,Y,Z).
    v2(X,Y) :- w(X,Z,Y).
    u(X,Y) :- v1(X,Y). u(X,Y) :- v2(X,Y)."""
    _, _, fds = pipeline(text)
    assert [f.triple for f in fds.on("u")] == [("u", frozenset({1}), 2)]


def test_figure1_call_fds():
    _, _, fds = pipeline(load("figure1.dl"))
    assert rendered(fds.on("v3")) == {"fd(v3,{},3,f1[]).", "fd(v3,{1},2,avg[1])."}


def test_depth_cap_drops_deep_identifiers_with_diagnostic():
    _, _, deep = pipeline(load("example2.dl"), depth_cap=1)
    assert all(f.id.depth <= 1 for f in deep.facts if isinstance(f.id, BaseNode))
    assert deep.diagnostics
    _, _, full = pipeline(load("example2.dl"))
    assert deep.facts < full.facts


def test_saturate_rejects_zero_depth_cap():
    _, mf, _ = pipeline(load("example2.dl"))
    with pytest.raises(ValueError):
        saturate(mf, depth_cap=0)


def test_identifier_json_round_trip():
    term = BaseNode("id2", (BaseNode("id1", (Col(1),)), ConstLeaf("x"), ConstLeaf(3)))
    assert id_from_json(id_to_json(term)) == term


def test_remap_and_replace():
    term = BaseNode("id2", (Col(1), Col(2)))
    assert remap_id(term, {1: 3, 2: 1}) == BaseNode("id2", (Col(3), Col(1)))
    with pytest.raises(UnmappedColumn):
        remap_id(term, {1: 1})
    nested = replace_in_id(term, 1, BaseNode("id1", (Col(4),)))
    assert str(nested) == "id2[id1[4],2]"
    with pytest.raises(DepthCapExceeded):
        replace_in_id(term, 1, BaseNode("id1", (Col(4),)), cap=1)


def test_step_constraint_fds():
    mf = MetaFactBase(eq=frozenset({("v", 1, 2)}), const=frozenset({("v", 3, "a")}))
    assert rendered(step_constraint_fds(mf)) == {
        "fd(v,{1},2,1).", "fd(v,{2},1,2).", "fd(v,{},3,'a')."}
    assert "fd(v,{},3,'3')." in rendered(step_constraint_fds(mf, "column"))


def test_step_position_mapped_drops_projected_columns():
    mf = MetaFactBase(rel=frozenset({("v", "b", OperatorKind.PROJECTION)}),
                      pos=frozenset({("v", "b", 1, 2), ("v", "b", 2, 3)}))
    f1 = Fd("b", frozenset({2}), 3, BaseNode("id1", (Col(2),)))
    f2 = Fd("b", frozenset({1}), 3, BaseNode("id2", (Col(1),)))
    assert rendered(step_position_mapped([f1, f2], mf)) == {"fd(v,{1},2,id1[1])."}


def test_step_transitive_and_equate():
    trans = trans_set(MetaFactBase(base=frozenset({("b", 3)})))
    f = Fd("b", frozenset({1}), 2, BaseNode("id1", (Col(1),)))
    g = Fd("b", frozenset({2}), 3, BaseNode("id2", (Col(2),)))
    assert rendered(step_transitive([f, g], trans)) == {"fd(b,{1},3,id2[id1[1]])."}
    h = Fd("b", frozenset({1}), 3, f.id)
    assert rendered(step_equate_rhs([f, h], trans)) == {"fd(b,{2},3,2).", "fd(b,{3},2,3)."}
    assert step_transitive([f, g], trans_set(MetaFactBase())) == set()


def test_step_udf():
    mf = MetaFactBase(call=frozenset({("v", frozenset({1, 2}), 3, "f")}))
    assert rendered(step_udf(mf)) == {"fd(v,{1,2},3,f[1,2])."}


def test_step_recursion():
    mf = MetaFactBase(rec=frozenset({("p", "q", "r")}))
    base = Fd("q", frozenset({1}), 2, Col(1))
    seeds, promoted = step_recursion([base], [Fd("r", frozenset({1}), 2, Col(1))], mf)
    assert rendered(seeds) == rendered(promoted) == {"fd(p,{1},2,1)."}
    _, promoted = step_recursion([base], [Fd("r", frozenset({1}), 2, Col(2))], mf)
    assert promoted == set()


def test_saturation_is_deterministic():
    a = pipeline(load("ancestor.dl"))[2]
    b = pipeline(load("ancestor.dl"))[2]
    assert a.render(True) == b.render(True)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_programs_are_sound(seed):
    np = normalize(validate(random_program(seed)))
    fds = saturate(extract(np), fd_seeds(np))
    report = soundness_sweep(np, fds.facts, trials=10, seed=seed, report_missed=False, strict=False)
    assert report.violations == ()
