"""Recursive-descent parser and canonical renderer for the schema language.

Grammar (``%`` starts a comment that runs to end of line)::

    program   := (decl | rule)*
    decl      := "base" IDENT "(" name ("," name)* ")" "."
               | "fd" IDENT ":" set "->" INT "."
               | "func" IDENT "/" INT "."
               | "func" IDENT "writes" IDENT "."
               | "ftype" IDENT STRING "."
               | "call" IDENT ":" set "->" INT "using" IDENT "."
               | "dep" IDENT "->" IDENT "."
    rule      := atom ":-" literal ("," literal)* "."
    atom      := IDENT "(" [term ("," term)*] ")"
    literal   := atom | "not" atom
               | VAR "=" VAR | VAR "=" const | VAR "=" IDENT "(" [term ("," term)*] ")"
               | term CMP term
    set       := "{" [INT ("," INT)*] "}"
    term      := VAR | const
    const     := NUMBER | STRING | IDENT
    CMP       := "<" | "<=" | ">" | ">=" | "!=" | "<>"

A declaration keyword only starts a declaration when it is followed by an
identifier, so ``base(X) :- ...`` is still an ordinary rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from schemalyze.errors import SchemaSyntaxError
from schemalyze.ir import (
    COMPARISON_OPS,
    Atom,
    BaseDecl,
    CallDecl,
    Condition,
    ConstEq,
    Constant,
    DepDecl,
    FdDecl,
    FtypeDecl,
    FuncDecl,
    FuncEq,
    Opaque,
    Program,
    Rule,
    SourceSpan,
    Term,
    ValidatedProgram,
    VarEq,
    Variable,
    WritesDecl,
    render_literal,
)

__all__ = ["SourceSpan", "parse_program", "render_program"]

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"%[^\n]*"),
    ("STRING", r"'(?:[^'\\\n]|\\.)*'"),
    ("ARROW", r"->"),
    ("IF", r":-"),
    ("NUMBER", r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?"),
    ("VAR", r"[A-Z][A-Za-z0-9_]*"),
    ("IDENT", r"[a-z][A-Za-z0-9_]*"),
    ("CMP", r"<=|>=|!=|<>|<|>"),
    ("PUNCT", r"[(),.:{}/=]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{rx})" for name, rx in _TOKEN_SPEC))
_ESCAPES = {"n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    offset: int

    @property
    def label(self) -> str:
        return self.text if self.kind in ("PUNCT", "ARROW", "IF", "CMP") else self.kind


def _unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append(_ESCAPES.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(line, pos - line_start + 1, 1)
            raise SchemaSyntaxError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        assert kind is not None
        if kind not in ("WS", "COMMENT"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1, pos))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1, pos))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, expected: set[str], what: str | None = None) -> SchemaSyntaxError:
        tok = self.tok
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        span = SourceSpan(tok.line, tok.column, max(len(tok.text), 1))
        return SchemaSyntaxError(what or f"unexpected {found}", span, frozenset(expected))

    def is_punct(self, text: str) -> bool:
        return self.tok.kind in ("PUNCT", "ARROW", "IF", "CMP") and self.tok.text == text

    def expect_punct(self, text: str) -> Token:
        if not self.is_punct(text):
            raise self.error({text})
        return self.advance()

    def expect_kind(self, kind: str) -> Token:
        if self.tok.kind != kind:
            raise self.error({kind})
        return self.advance()

    def expect_keyword(self, word: str) -> Token:
        if self.tok.kind != "IDENT" or self.tok.text != word:
            raise self.error({word})
        return self.advance()

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def span_from(self, start: Token) -> SourceSpan:
        last = self.tokens[self.i - 1]
        length = last.offset + len(last.text) - start.offset
        return SourceSpan(start.line, start.column, length)

    # -- grammar -------------------------------------------------------

    def program(self) -> Program:
        parts: dict[str, list] = {k: [] for k in (
            "rules", "base_decls", "fd_decls", "func_decls", "call_decls",
            "writes_decls", "ftype_decls", "dep_decls")}
        while self.tok.kind != "EOF":
            handler = self._declaration_handler()
            if handler is None:
                parts["rules"].append(self.rule())
            else:
                key, item = handler()
                parts[key].append(item)
        return Program(**{k: tuple(v) for k, v in parts.items()})

    def _declaration_handler(self) -> Callable[[], tuple[str, object]] | None:
        if self.tok.kind != "IDENT" or self.peek().kind != "IDENT":
            return None
        return {
            "base": self.base_decl,
            "fd": self.fd_decl,
            "func": self.func_decl,
            "call": self.call_decl,
            "ftype": self.ftype_decl,
            "dep": self.dep_decl,
        }.get(self.tok.text)

    def base_decl(self) -> tuple[str, BaseDecl]:
        start = self.advance()
        name = self.expect_kind("IDENT").text
        self.expect_punct("(")
        attrs = [self.attribute_name()]
        while self.is_punct(","):
            self.advance()
            attrs.append(self.attribute_name())
        self.expect_punct(")")
        self.expect_punct(".")
        return "base_decls", BaseDecl(name, tuple(attrs), self.span_from(start))

    def attribute_name(self) -> str:
        if self.tok.kind not in ("IDENT", "VAR"):
            raise self.error({"IDENT"})
        return self.advance().text

    def fd_decl(self) -> tuple[str, FdDecl]:
        start = self.advance()
        name = self.expect_kind("IDENT").text
        self.expect_punct(":")
        lhs = self.int_set()
        self.expect_punct("->")
        rhs = self.integer()
        self.expect_punct(".")
        return "fd_decls", FdDecl(name, lhs, rhs, self.span_from(start))

    def func_decl(self) -> tuple[str, object]:
        start = self.advance()
        name = self.expect_kind("IDENT").text
        if self.tok.kind == "IDENT" and self.tok.text == "writes":
            self.advance()
            table = self.expect_kind("IDENT").text
            self.expect_punct(".")
            return "writes_decls", WritesDecl(name, table, self.span_from(start))
        if not self.is_punct("/"):
            raise self.error({"/", "writes"})
        self.advance()
        arity = self.integer()
        self.expect_punct(".")
        return "func_decls", FuncDecl(name, arity, self.span_from(start))

    def call_decl(self) -> tuple[str, CallDecl]:
        start = self.advance()
        view = self.expect_kind("IDENT").text
        self.expect_punct(":")
        inputs = self.int_set()
        self.expect_punct("->")
        output = self.integer()
        self.expect_keyword("using")
        function = self.expect_kind("IDENT").text
        self.expect_punct(".")
        return "call_decls", CallDecl(view, inputs, output, function, self.span_from(start))

    def ftype_decl(self) -> tuple[str, FtypeDecl]:
        start = self.advance()
        name = self.expect_kind("IDENT").text
        value = self.string()
        self.expect_punct(".")
        return "ftype_decls", FtypeDecl(name, value, self.span_from(start))

    def dep_decl(self) -> tuple[str, DepDecl]:
        start = self.advance()
        source = self.expect_kind("IDENT").text
        self.expect_punct("->")
        target = self.expect_kind("IDENT").text
        self.expect_punct(".")
        return "dep_decls", DepDecl(source, target, self.span_from(start))

    def int_set(self) -> frozenset[int]:
        self.expect_punct("{")
        items: list[int] = []
        if not self.is_punct("}"):
            items.append(self.integer())
            while self.is_punct(","):
                self.advance()
                items.append(self.integer())
        self.expect_punct("}")
        return frozenset(items)

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "NUMBER" or not tok.text.isdigit():
            raise self.error({"INT"})
        self.advance()
        return int(tok.text)

    def string(self) -> str:
        tok = self.expect_kind("STRING")
        return _unescape(tok.text[1:-1])

    def rule(self) -> Rule:
        start = self.tok
        head = self.atom()
        self.expect_punct(":-")
        body: list[Atom] = []
        conditions: list[Condition] = []
        while True:
            lit = self.literal()
            (body if isinstance(lit, Atom) else conditions).append(lit)
            if self.is_punct(","):
                self.advance()
                continue
            if self.is_punct("."):
                self.advance()
                break
            raise self.error({",", "."})
        return Rule(head, tuple(body), tuple(conditions), self.span_from(start))

    def atom(self, negated: bool = False) -> Atom:
        name = self.expect_kind("IDENT").text
        self.expect_punct("(")
        args: list[Term] = []
        if not self.is_punct(")"):
            args.append(self.term())
            while self.is_punct(","):
                self.advance()
                args.append(self.term())
        self.expect_punct(")")
        return Atom(name, tuple(args), negated)

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "VAR":
            self.advance()
            return Variable(tok.text)
        return self.constant()

    def constant(self) -> Constant:
        tok = self.tok
        if tok.kind == "NUMBER":
            self.advance()
            text = tok.text
            return Constant(int(text) if re.fullmatch(r"-?\d+", text) else float(text))
        if tok.kind == "STRING":
            return Constant(self.string())
        if tok.kind == "IDENT":
            self.advance()
            return Constant(tok.text)
        raise self.error({"VAR", "NUMBER", "STRING", "IDENT"})

    def literal(self) -> Atom | Condition:
        tok = self.tok
        if tok.kind == "IDENT" and tok.text == "not" and self.peek().kind == "IDENT":
            self.advance()
            return self.atom(negated=True)
        if tok.kind == "IDENT" and self.peek().kind == "PUNCT" and self.peek().text == "(":
            return self.atom()
        start = self.tok
        left = self.term()
        if self.is_punct("="):
            self.advance()
            return self.equality(left, start)
        if self.tok.kind == "CMP":
            op = self.advance().text
            return Opaque(op, left, self.term())
        raise self.error({"=", *COMPARISON_OPS, "("})

    def equality(self, left: Term, start: Token) -> Condition:
        if isinstance(left, Constant):
            right = self.term()
            if isinstance(right, Variable):
                return ConstEq(right, left)
            raise SchemaSyntaxError("equality between two constants",
                                    SourceSpan(start.line, start.column, 1))
        if self.tok.kind == "VAR":
            right_tok = self.advance()
            if right_tok.text == left.name:
                raise SchemaSyntaxError(f"trivial equality {left} = {left}",
                                        SourceSpan(start.line, start.column, 1))
            return VarEq(left, Variable(right_tok.text))
        if self.tok.kind == "IDENT" and self.peek().kind == "PUNCT" and self.peek().text == "(":
            function = self.advance().text
            self.advance()
            args: list[Term] = []
            if not self.is_punct(")"):
                args.append(self.term())
                while self.is_punct(","):
                    self.advance()
                    args.append(self.term())
            self.expect_punct(")")
            return FuncEq(left, function, tuple(args))
        return ConstEq(left, self.constant())


def parse_program(text: str) -> Program:
    """Parse source text into a :class:`Program`; spans are attached to
    every rule and declaration. Raises :class:`SchemaSyntaxError`."""
    return _Parser(text).program()


def _render_set(items: frozenset[int]) -> str:
    return "{" + ",".join(str(i) for i in sorted(items)) + "}"


def render_declarations(program: Program) -> list[str]:
    lines = [f"base {d.predicate}({','.join(d.attributes)})." for d in program.base_decls]
    lines += [f"fd {d.predicate}: {_render_set(d.lhs)} -> {d.rhs}." for d in program.fd_decls]
    lines += [f"func {d.name}/{d.arity}." for d in program.func_decls]
    lines += [f"func {d.function} writes {d.table}." for d in program.writes_decls]
    lines += [f"ftype {d.function} {render_literal(d.ftype)}." for d in program.ftype_decls]
    lines += [f"call {d.view}: {_render_set(d.inputs)} -> {d.output} using {d.function}."
              for d in program.call_decls]
    lines += [f"dep {d.source} -> {d.target}." for d in program.dep_decls]
    return lines


def render_program(program: Program | ValidatedProgram) -> str:
    """Canonical text: declarations first, then one rule per line."""
    if isinstance(program, ValidatedProgram):
        program = program.program
    lines = render_declarations(program) + [str(r) for r in program.rules]
    return "".join(line + "\n" for line in lines)
