from __future__ import annotations

import pytest

from schemalyze.errors import (
    ArityMismatch,
    BasePredicateInHead,
    DuplicateBaseDecl,
    FdOutOfBounds,
    NonStratifiable,
    UnrangeRestrictedVariable,
    ValidationError,
)
from schemalyze.ir import (
    Atom,
    BaseDecl,
    ConstEq,
    Constant,
    FdDecl,
    Program,
    Rule,
    Variable,
    VarEq,
    render_literal,
    validate,
)
from schemalyze.parser import parse_program

X, Y, Z = Variable("X"), Variable("Y"), Variable("Z")


def test_variable_names_must_be_capitalized():
    with pytest.raises(ValueError):
        Variable("x")


def test_trivial_equality_rejected():
    with pytest.raises(ValueError):
        VarEq(X, X)


def test_render_literal_escapes_quotes():
    assert render_literal("it's") == "'it\\'s'"
    assert render_literal(3) == "3"


def test_rule_str():
    rule = Rule(Atom("p", (X,)), (Atom("q", (X, Y)), Atom("r", (Y,), negated=True)),
                (ConstEq(Y, Constant(2)),))
    assert str(rule) == "p(X) :- q(X,Y), not r(Y), Y=2."


def test_implicit_base_declarations():
    vp = validate(parse_program("p(X) :- q(X,Y)."))
    assert vp.base_predicates == {"q"}
    assert vp.program.bases["q"].attributes == ("col1", "col2")
    assert vp.arities == {"p": 1, "q": 2}


@pytest.mark.parametrize("text, error", [
    ("p(X) :- q(X). r(X) :- q(X,X).", ArityMismatch),
    ("p(X,Y) :- q(X).", UnrangeRestrictedVariable),
    ("p(X) :- q(X), not r(Y).", UnrangeRestrictedVariable),
    ("base q(a). base q(b).", DuplicateBaseDecl),
    ("base q(a,b). fd q: {1} -> 3.", FdOutOfBounds),
    ("base q(a,b). fd q: {1} -> 1.", FdOutOfBounds),
    ("p(X) :- q(X), not p(X).", NonStratifiable),
    ("base q(a). q(X) :- r(X).", BasePredicateInHead),
    ("func f/1. p(X,Y) :- q(X), Y=f(X,X).", ArityMismatch),
])
def test_validation_errors(text, error):
    with pytest.raises(error):
        validate(parse_program(text))


def test_validation_errors_carry_spans():
    with pytest.raises(ValidationError) as info:
        validate(parse_program("p(X) :- q(X).\np(X,Y) :- q(X)."))
    assert info.value.span is not None and info.value.span.line == 2


def test_stratification_of_negation():
    vp = validate(parse_program("a(X) :- b(X). c(X) :- b(X), not a(X). d(X) :- c(X)."))
    assert vp.strata["c"] > vp.strata["a"]
    assert vp.strata["d"] >= vp.strata["c"]


def test_validate_is_idempotent():
    program = Program(rules=(Rule(Atom("p", (X,)), (Atom("q", (X, Z)),)),),
                      base_decls=(BaseDecl("q", ("a", "b")),),
                      fd_decls=(FdDecl("q", frozenset({1}), 2),))
    once = validate(program)
    assert validate(once).program == once.program
