"""Random non-recursive programs already in normal form.

Used by property tests and the soundness sweep. Each program has two or
three base tables with random FDs and a handful of derived predicates,
each defined by one relational operator over earlier predicates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from schemalyze.ir import (
    Atom,
    BaseDecl,
    ConstEq,
    Constant,
    FdDecl,
    FuncEq,
    Opaque,
    Program,
    Rule,
    VarEq,
    Variable,
)
from schemalyze.normalizer import OperatorKind

KINDS = tuple(OperatorKind)


@dataclass(frozen=True)
class GenConfig:
    max_rules: int = 5
    max_arity: int = 3
    constants: tuple[int, ...] = (0, 1, 2, 3)
    fd_probability: float = 0.6
    udf_probability: float = 0.25


def _vars(prefix: str, n: int) -> tuple[Variable, ...]:
    return tuple(Variable(f"{prefix}{i}") for i in range(1, n + 1))


class _Gen:
    def __init__(self, rng: random.Random, cfg: GenConfig) -> None:
        self.rng = rng
        self.cfg = cfg
        self.arities: dict[str, int] = {}
        self.rules: list[Rule] = []
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def pick(self, min_arity: int = 1) -> str | None:
        options = sorted(p for p, a in self.arities.items() if a >= min_arity)
        return self.rng.choice(options) if options else None

    def pair(self, same_arity: bool) -> tuple[str, str] | None:
        preds = sorted(self.arities)
        pairs = [(a, b) for a in preds for b in preds
                 if a != b and (not same_arity or self.arities[a] == self.arities[b])]
        return self.rng.choice(pairs) if pairs else None

    def const(self) -> Constant:
        return Constant(self.rng.choice(self.cfg.constants))

    def emit(self, head: Atom, body: tuple[Atom, ...], conds: tuple = ()) -> None:
        self.rules.append(Rule(head, body, conds))
        self.arities[head.predicate] = head.arity

    def projection(self) -> bool:
        q = self.pick()
        if q is None:
            return False
        args = _vars("X", self.arities[q])
        keep = self.rng.sample(args, self.rng.randint(1, len(args)))
        self.emit(Atom(self.fresh(), tuple(keep)), (Atom(q, args),))
        return True

    def extension(self) -> bool:
        q = self.pick()
        if q is None or self.arities[q] >= self.cfg.max_arity + 2:
            return False
        args = _vars("X", self.arities[q])
        new = _vars("Y", self.rng.randint(1, 2))
        conds = []
        for y in new:
            roll = self.rng.random()
            if roll < self.cfg.udf_probability:
                inputs = self.rng.sample(args, self.rng.randint(0, len(args)))
                conds.append(FuncEq(y, self.rng.choice(("f", "g")), tuple(inputs)))
            elif roll < 0.6:
                conds.append(VarEq(self.rng.choice(args), y))
            else:
                conds.append(ConstEq(y, self.const()))
        self.emit(Atom(self.fresh(), args + new), (Atom(q, args),), tuple(conds))
        return True

    def selection(self) -> bool:
        q = self.pick()
        if q is None:
            return False
        args = _vars("X", self.arities[q])
        conds: list = []
        for _ in range(self.rng.randint(1, 2)):
            roll = self.rng.random()
            if roll < 0.35 and len(args) >= 2:
                a, b = self.rng.sample(args, 2)
                conds.append(VarEq(a, b))
            elif roll < 0.7:
                conds.append(ConstEq(self.rng.choice(args), self.const()))
            else:
                conds.append(Opaque(self.rng.choice(("<", ">=", "!=")), self.rng.choice(args), self.const()))
        conds = list(dict.fromkeys(conds))
        self.emit(Atom(self.fresh(), args), (Atom(q, args),), tuple(conds))
        return True

    def binary(self, kind: OperatorKind) -> bool:
        same = kind in (OperatorKind.UNION, OperatorKind.INTERSECTION, OperatorKind.NEGATION)
        pair = self.pair(same)
        if pair is None:
            return False
        q, r = pair
        qa = _vars("X", self.arities[q])
        if same:
            head = Atom(self.fresh(), qa)
            if kind is OperatorKind.UNION:
                self.emit(head, (Atom(q, qa),))
                self.emit(head, (Atom(r, qa),))
            else:
                negated = kind is OperatorKind.NEGATION
                self.emit(head, (Atom(q, qa), Atom(r, qa, negated)))
            return True
        ra = list(_vars("Z", self.arities[r]))
        if kind is OperatorKind.JOIN:
            k = self.rng.randint(1, min(len(qa), len(ra)))
            for i, v in zip(self.rng.sample(range(len(ra)), k), self.rng.sample(qa, k)):
                ra[i] = v
        head_args = qa + tuple(v for v in ra if v not in qa)
        if len(head_args) > self.cfg.max_arity + 3:
            return False
        self.emit(Atom(self.fresh(), head_args), (Atom(q, qa), Atom(r, tuple(ra))))
        return True

    def step(self, kind: OperatorKind) -> bool:
        if kind is OperatorKind.PROJECTION:
            return self.projection()
        if kind is OperatorKind.EXTENSION:
            return self.extension()
        if kind is OperatorKind.SELECTION:
            return self.selection()
        return self.binary(kind)


def random_program(seed: int, cfg: GenConfig = GenConfig()) -> Program:
    """A random normal-form program with at most ``cfg.max_rules`` rules."""
    rng = random.Random(seed)
    gen = _Gen(rng, cfg)
    n_bases = rng.randint(2, 3)
    arities = [rng.randint(1, cfg.max_arity) for _ in range(n_bases)]
    arities[1] = arities[0]
    bases, fds = [], []
    for i, arity in enumerate(arities, start=1):
        name = f"b{i}"
        bases.append(BaseDecl(name, tuple(f"a{j}" for j in range(1, arity + 1))))
        gen.arities[name] = arity
        for rhs in range(1, arity + 1):
            if arity >= 2 and rng.random() < cfg.fd_probability / arity:
                others = [c for c in range(1, arity + 1) if c != rhs]
                lhs = frozenset(rng.sample(others, rng.randint(0 if rng.random() < 0.1 else 1, len(others))))
                fds.append(FdDecl(name, lhs, rhs))
    budget = rng.randint(1, cfg.max_rules)
    while len(gen.rules) < budget:
        kinds = list(KINDS)
        rng.shuffle(kinds)
        for kind in kinds:
            if kind is OperatorKind.UNION and len(gen.rules) + 2 > budget:
                continue
            if gen.step(kind):
                break
        else:
            break
    return Program(rules=tuple(gen.rules), base_decls=tuple(bases), fd_decls=tuple(dict.fromkeys(fds)))
