from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS, load
from schemalyze.errors import UnclassifiableRule
from schemalyze.ir import validate
from schemalyze.normalizer import OperatorKind, classify, normalize
from schemalyze.oracle import evaluate, random_instance
from schemalyze.parser import parse_program, render_program
from schemalyze.randprog import random_program

EXAMPLE1 = "p(W,Z) :- s(W,X), t(X,Y,Z), Y=2."


def kinds(np):
    return [(r.kind, r.head.predicate) for r in np.rules]


@pytest.mark.parametrize("text, kind", [
    ("p(X) :- q(X,Y).", OperatorKind.PROJECTION),
    ("p(X,Y) :- q(X,Y), X=3.", OperatorKind.SELECTION),
    ("p(X,Y) :- q(X,Y), X < Y.", OperatorKind.SELECTION),
    ("p(X,Y,Z) :- q(X,Y), Z=X.", OperatorKind.EXTENSION),
    ("p(X,Y,Z) :- q(X,Y), Z=f(X).", OperatorKind.EXTENSION),
    ("p(X,Y,A,B) :- q(X,Y), r(A,B).", OperatorKind.PRODUCT),
    ("p(X,Y,B) :- q(X,Y), r(Y,B).", OperatorKind.JOIN),
    ("p(X,Y) :- q(X,Y), r(X,Y).", OperatorKind.INTERSECTION),
    ("p(X,Y) :- q(X,Y), not r(X,Y).", OperatorKind.NEGATION),
])
def test_classify_each_template(text, kind):
    (rule,) = parse_program(text).rules
    assert classify(rule) is kind


def test_classify_union_needs_siblings():
    rules = parse_program("p(X) :- q(X). p(X) :- r(X).").rules
    assert classify(rules[0], rules) is OperatorKind.UNION


def test_classify_rejects_composite_rule():
    (rule,) = parse_program(EXAMPLE1).rules
    with pytest.raises(UnclassifiableRule):
        classify(rule)


def test_example1_decomposition():
    np = normalize(parse_program(EXAMPLE1))
    assert kinds(np) == [(OperatorKind.JOIN, "p__n1"), (OperatorKind.SELECTION, "p__n2"),
                         (OperatorKind.PROJECTION, "p")]
    assert [str(r) for r in np.rules] == [
        "p__n1(W,X,Y,Z) :- s(W,X), t(X,Y,Z).",
        "p__n2(W,X,Y,Z) :- p__n1(W,X,Y,Z), Y=2.",
        "p(W,Z) :- p__n2(W,X,Y,Z).",
    ]
    assert set(np.generated) == {"p__n1", "p__n2"}


def test_normal_program_is_a_fixpoint():
    for path in sorted(CORPUS.glob("*.dl")):
        np = normalize(parse_program(path.read_text()))
        again = normalize(parse_program(render_program(np.as_program())))
        assert [str(r) for r in again.rules] == [str(r) for r in np.rules], path.name


def test_generated_names_avoid_collisions():
    np = normalize(parse_program("p__n1(X) :- q(X). p(W) :- s(W,X), t(X,Y), Y=2."))
    heads = [r.head.predicate for r in np.rules]
    assert len(heads) == len(set(heads))
    assert "p__n1" not in np.generated


def test_recursive_union_puts_exit_rule_first():
    np = normalize(parse_program(load("ancestor.dl")))
    unions = [r for r in np.rules if r.kind is OperatorKind.UNION]
    assert [r.body[0].predicate for r in unions] == ["p__n1", "p__n2"]
    (exit_rule,) = [r for r in np.rules if r.head.predicate == "p__n1"]
    assert exit_rule.kind is OperatorKind.EXTENSION


def test_three_way_union_becomes_binary_chain():
    np = normalize(parse_program("p(X) :- a(X). p(X) :- b(X). p(X) :- c(X)."))
    per_head: dict[str, int] = {}
    for r in np.rules:
        assert r.kind is OperatorKind.UNION
        per_head[r.head.predicate] = per_head.get(r.head.predicate, 0) + 1
    assert set(per_head.values()) == {2}


def test_example1_matches_hand_evaluation():
    np = normalize(parse_program(EXAMPLE1))
    domain = (1, 2, 3)
    s = set(itertools.product(domain, repeat=2))
    t = {(x, y, z) for x, y, z in itertools.product(domain, repeat=3) if (x + y + z) % 2}
    expected = {(w, z) for (w, x) in s for (x2, y, z) in t if x == x2 and y == 2}
    assert evaluate(np, {"s": s, "t": t})["p"] == expected


def _equivalent(text_or_program, trials: int, seed: int) -> None:
    program = parse_program(text_or_program) if isinstance(text_or_program, str) else text_or_program
    vp = validate(program)
    np = normalize(vp)
    bases = {p: vp.arities[p] for p in vp.base_predicates}
    for k in range(trials):
        edb = random_instance(bases, vp.program.fd_decls, 8, seed * 1000 + k)
        original, normal = evaluate(vp, edb), evaluate(np, edb)
        for pred in vp.derived_predicates:
            assert original[pred] == normal[pred], (pred, edb)


@pytest.mark.parametrize("text", [
    EXAMPLE1,
    "p(X,Z) :- q(X,Y), r(Y,Z), not s(X,Z), X != Z.",
    "p(X,Y) :- q(X,Y), Y=X. p(X,Y) :- r(Y,X).",
    "p(A,B,C) :- q(A,B), C=f(A,B), A=1.",
    "p(X,Y) :- q(X,Y), r(Y,X), s(X).",
    "p(X) :- q(X,X).",
    "p(X,3) :- q(X,Y).",
])
def test_normalization_preserves_semantics(text):
    _equivalent(text, trials=25, seed=7)


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.dl")), ids=lambda p: p.name)
def test_corpus_normalization_preserves_semantics(path):
    _equivalent(path.read_text(), trials=10, seed=3)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_normal_programs_are_already_normal(seed):
    program = validate(random_program(seed)).program
    np = normalize(program)
    assert [str(r) for r in np.rules] == [str(r) for r in program.rules]
