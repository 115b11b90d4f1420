"""Ground truth on concrete instances: bottom-up evaluation and FD checks.

Used to test the analyses, never by them. Function calls (``Y = f(X)``)
are interpreted by a fixed hash so that every run agrees on their values.
"""

from __future__ import annotations

import itertools
import random
import zlib
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from schemalyze.errors import SoundnessViolation
from schemalyze.fd.ids import node_ids
from schemalyze.graphs import is_cyclic, strongly_connected_components
from schemalyze.ir import (
    BaseDecl,
    Condition,
    ConstEq,
    Constant,
    FdDecl,
    FuncEq,
    Opaque,
    Rule,
    Term,
    ValidatedProgram,
    VarEq,
    Variable,
    validate,
)

Value = Any
Instance = dict  # predicate -> frozenset of tuples

DEFAULT_DOMAIN: tuple[Value, ...] = (0, 1, 2, 3)
FUNCTION_RANGE = 4


def _as_validated(program: Any) -> ValidatedProgram:
    if isinstance(program, ValidatedProgram):
        return program
    if hasattr(program, "as_program"):
        program = program.as_program()
    return validate(program)


def apply_function(name: str, args: Sequence[Value]) -> int:
    """Deterministic stand-in for a user-defined function."""
    return zlib.crc32(repr((name, tuple(args))).encode()) % FUNCTION_RANGE


def _order_key(value: Value) -> tuple[int, Value]:
    return (1, value) if isinstance(value, str) else (0, value)


_COMPARE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "!=": lambda a, b: a != b,
    "<>": lambda a, b: a != b,
}


def _value(term: Term, env: Mapping[Variable, Value]) -> Value:
    return term.value if isinstance(term, Constant) else env[term]


def _match(args: Sequence[Term], row: tuple, env: dict) -> dict | None:
    out = env
    for term, val in zip(args, row):
        if isinstance(term, Constant):
            if term.value != val:
                return None
        elif term in out:
            if out[term] != val:
                return None
        else:
            if out is env:
                out = dict(env)
            out[term] = val
    return out


def _resolve(conditions: Sequence[Condition], env: dict) -> dict | None:
    """Apply every condition to one binding; None when one fails."""
    pending = list(conditions)
    while pending:
        progressed = False
        for cond in list(pending):
            if isinstance(cond, VarEq):
                a, b = cond.left in env, cond.right in env
                if a and b:
                    ok = env[cond.left] == env[cond.right]
                elif a or b:
                    env[cond.right if a else cond.left] = env[cond.left if a else cond.right]
                    ok = True
                else:
                    continue
            elif isinstance(cond, ConstEq):
                if cond.var in env:
                    ok = env[cond.var] == cond.value.value
                else:
                    env[cond.var] = cond.value.value
                    ok = True
            elif isinstance(cond, FuncEq):
                if not all(v in env for v in cond.inputs):
                    continue
                result = apply_function(cond.function, [_value(a, env) for a in cond.args])
                if cond.var in env:
                    ok = env[cond.var] == result
                else:
                    env[cond.var] = result
                    ok = True
            else:
                if not all(v in env for v in cond.vars):
                    continue
                ok = _COMPARE[cond.op](_order_key(_value(cond.left, env)),
                                       _order_key(_value(cond.right, env)))
            if not ok:
                return None
            pending.remove(cond)
            progressed = True
        if not progressed:
            raise ValueError(f"conditions {pending} cannot be resolved")
    return env


def _eval_rule(rule: Rule, db: Mapping[str, frozenset]) -> set[tuple]:
    envs: list[dict] = [{}]
    for atom in rule.positive_body:
        rows = db.get(atom.predicate, frozenset())
        envs = [e for env in envs for row in rows
                if (e := _match(atom.args, row, env)) is not None]
        if not envs:
            return set()
    out: set[tuple] = set()
    for env in envs:
        env = _resolve(rule.conditions, dict(env))
        if env is None:
            continue
        if any(tuple(_value(t, env) for t in a.args) in db.get(a.predicate, frozenset())
               for a in rule.negative_body):
            continue
        out.add(tuple(_value(t, env) for t in rule.head.args))
    return out


def evaluate(program: Any, edb: Mapping[str, Iterable[tuple]]) -> Instance:
    """Stratified bottom-up evaluation. Returns every base and derived relation.

    ``program`` may be a Program, ValidatedProgram or NormalProgram.
    Predicates are evaluated one dependency component at a time; recursive
    components iterate to a fixpoint.
    """
    vp = _as_validated(program)
    rules = vp.rules
    db: dict[str, frozenset] = {p: frozenset() for p in vp.arities}
    for pred in vp.base_predicates:
        db[pred] = frozenset(tuple(t) for t in edb.get(pred, ()))
    edges: dict[str, set[str]] = {}
    for rule in rules:
        edges.setdefault(rule.head.predicate, set()).update(a.predicate for a in rule.body)
    edb_size = sum(len(db[p]) for p in vp.base_predicates)
    cap = 10 * max(edb_size, 1) + len(rules)
    for component in strongly_connected_components(vp.derived_predicates, edges):
        members = set(component)
        own = [r for r in rules if r.head.predicate in members]
        if not own:
            continue
        if not is_cyclic(component, edges):
            db[component[0]] = frozenset(t for r in own for t in _eval_rule(r, db))
            continue
        for _ in range(cap):
            fresh = {p: set(db[p]) for p in members}
            for rule in own:
                fresh[rule.head.predicate] |= _eval_rule(rule, db)
            if all(len(fresh[p]) == len(db[p]) for p in members):
                break
            for p in members:
                db[p] = frozenset(fresh[p])
    return db


def holds_fd(rel: Iterable[tuple], lhs: Iterable[int], rhs: int) -> bool:
    """True iff tuples agreeing on the 1-based ``lhs`` columns agree on ``rhs``."""
    cols = sorted(lhs)
    seen: dict[tuple, Value] = {}
    for row in rel:
        key = tuple(row[c - 1] for c in cols)
        val = row[rhs - 1]
        if seen.setdefault(key, val) != val:
            return False
    return True


def program_constants(program: Any) -> tuple[Value, ...]:
    """Constants mentioned anywhere in the rules, in a stable order."""
    vp = _as_validated(program)
    found: list[Value] = []
    for rule in vp.rules:
        terms: list[Any] = [*rule.head.args, *(t for a in rule.body for t in a.args)]
        for cond in rule.conditions:
            if isinstance(cond, ConstEq):
                terms.append(cond.value)
            elif isinstance(cond, (FuncEq, Opaque)):
                terms.extend(cond.args if isinstance(cond, FuncEq) else (cond.left, cond.right))
        found.extend(t.value for t in terms if isinstance(t, Constant))
    return tuple(sorted(set(found), key=_order_key))


def _arity_map(decls: Any) -> dict[str, int]:
    if isinstance(decls, Mapping):
        return dict(decls)
    return {d.predicate: d.arity for d in decls}


def random_instance(decls: Mapping[str, int] | Iterable[BaseDecl], fd_decls: Iterable[FdDecl],
                    size: int, seed: int, domain: Sequence[Value] = DEFAULT_DOMAIN) -> Instance:
    """Random EDB of about ``size`` tuples per table satisfying ``fd_decls``.

    Tuples are drawn uniformly, then any tuple that would violate a declared
    FD together with an earlier tuple is dropped.
    """
    if size < 0:
        raise ValueError("size must be non-negative")
    rng = random.Random(seed)
    fds_by_pred: dict[str, list[FdDecl]] = {}
    for fd in fd_decls:
        fds_by_pred.setdefault(fd.predicate, []).append(fd)
    out: Instance = {}
    for pred, arity in sorted(_arity_map(decls).items()):
        kept: list[tuple] = []
        maps = [(sorted(fd.lhs), fd.rhs, {}) for fd in fds_by_pred.get(pred, ())]
        for _ in range(size):
            row = tuple(rng.choice(domain) for _ in range(arity))
            keys = [tuple(row[c - 1] for c in lhs) for lhs, _, _ in maps]
            if any(seen.get(k, row[rhs - 1]) != row[rhs - 1]
                   for k, (_, rhs, seen) in zip(keys, maps)):
                continue
            for k, (_, rhs, seen) in zip(keys, maps):
                seen[k] = row[rhs - 1]
            kept.append(row)
        out[pred] = frozenset(kept)
    return out


@dataclass(frozen=True)
class SweepReport:
    trials: int
    seed: int
    checked: int
    skipped: int = 0
    violations: tuple[dict, ...] = ()
    missed: tuple[dict, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "checked": self.checked,
            "skipped": self.skipped,
            "violations": list(self.violations),
            "missed": list(self.missed),
        }


def _serialize_instance(inst: Mapping[str, Iterable[tuple]]) -> dict[str, list[list]]:
    return {p: [list(t) for t in sorted(rows, key=lambda r: tuple(map(_order_key, r)))]
            for p, rows in sorted(inst.items())}


def _closure(attrs: frozenset[int], fds: Iterable[tuple[frozenset[int], int]]) -> set[int]:
    result = set(attrs)
    changed = True
    while changed:
        changed = False
        for lhs, rhs in fds:
            if rhs not in result and lhs <= result:
                result.add(rhs)
                changed = True
    return result


def _missed_candidates(instances: Sequence[Mapping[str, frozenset]], arities: Mapping[str, int],
                       derived: Mapping[str, list[tuple[frozenset[int], int]]],
                       max_arity: int) -> list[tuple[str, frozenset[int], int]]:
    """Minimal FDs that hold in every instance but are not implied by ``derived``."""
    found = []
    for pred, arity in sorted(arities.items()):
        if arity > max_arity or arity < 2:
            continue
        if all(len(inst.get(pred, ())) < 2 for inst in instances):
            continue
        known = derived.get(pred, [])
        for rhs in range(1, arity + 1):
            others = [c for c in range(1, arity + 1) if c != rhs]
            minimal: list[frozenset[int]] = []
            for k in range(len(others) + 1):
                for lhs in map(frozenset, itertools.combinations(others, k)):
                    if any(m <= lhs for m in minimal):
                        continue
                    if all(holds_fd(inst.get(pred, ()), lhs, rhs) for inst in instances):
                        minimal.append(lhs)
                        if rhs not in _closure(lhs, known):
                            found.append((pred, lhs, rhs))
    return found


def soundness_sweep(program: Any, fds: Iterable[Any], trials: int = 100, seed: int = 0,
                    size: int = 8, domain: Sequence[Value] | None = None, strict: bool = True,
                    report_missed: bool = True, max_missed_arity: int = 6,
                    trusted_functions: Iterable[str] = ()) -> SweepReport:
    """Check every FD in ``fds`` on ``trials`` random instances of ``program``.

    ``fds`` holds objects with ``pred``, ``lhs`` and ``rhs`` attributes. With
    ``strict`` the first violation raises :class:`SoundnessViolation`;
    otherwise violations are collected. FDs that held on every instance but
    are not implied by ``fds`` are reported as ``missed``, tagged
    ``structural`` if they still hold on larger instances over a wider
    value domain (dense enough that values still collide) and
    ``finite-domain`` otherwise. FDs whose identifier mentions one of
    ``trusted_functions`` (declared calls the oracle cannot interpret) are
    counted as ``skipped`` instead of checked.
    """
    vp = _as_validated(program)
    consts = program_constants(vp)
    dom = tuple(domain) if domain is not None else tuple(dict.fromkeys((*DEFAULT_DOMAIN, *consts)))
    bases = {p: vp.arities[p] for p in vp.base_predicates}
    trusted = set(trusted_functions)
    fds = list(fds)
    skipped = [f for f in fds if trusted and node_ids(getattr(f, "id", None)) & trusted]
    checks = sorted({(f.pred, frozenset(f.lhs), f.rhs) for f in fds if f not in skipped},
                    key=lambda t: (t[0], sorted(t[1]), t[2]))
    rng = random.Random(seed)
    trial_seeds = [rng.randrange(2 ** 32) for _ in range(trials)]
    violations: list[dict] = []
    results: list[Instance] = []
    for trial, tseed in enumerate(trial_seeds):
        edb = random_instance(bases, vp.program.fd_decls, size, tseed, dom)
        db = evaluate(vp, edb)
        results.append(db)
        for pred, lhs, rhs in checks:
            if holds_fd(db.get(pred, ()), lhs, rhs):
                continue
            witness = {
                "trial": trial, "trial_seed": tseed, "pred": pred,
                "lhs": sorted(lhs), "rhs": rhs, "edb": _serialize_instance(edb),
                "relation": _serialize_instance({pred: db.get(pred, frozenset())})[pred],
            }
            if strict:
                from schemalyze.parser import render_program
                witness["program"] = render_program(vp)
                raise SoundnessViolation(
                    f"fd {pred}: {{{','.join(map(str, sorted(lhs)))}}} -> {rhs} fails in trial {trial}",
                    witness)
            violations.append(witness)

    missed: list[dict] = []
    if report_missed and trials:
        derived: dict[str, list[tuple[frozenset[int], int]]] = {}
        # skipped FDs still count as known: they were derived, just not checkable
        for f in fds:
            derived.setdefault(f.pred, []).append((frozenset(f.lhs), f.rhs))
        candidates = _missed_candidates(results, vp.arities, derived, max_missed_arity)
        if candidates:
            # 4x the values and 4x the tuples: new values appear, collisions remain
            wide = tuple(dict.fromkeys((*range(4 * len(dom)), *consts)))
            wide_results = [evaluate(vp, random_instance(bases, vp.program.fd_decls, 4 * size, s, wide))
                            for s in trial_seeds]
            for pred, lhs, rhs in candidates:
                structural = all(holds_fd(db.get(pred, ()), lhs, rhs) for db in wide_results)
                missed.append({"pred": pred, "lhs": sorted(lhs), "rhs": rhs,
                               "kind": "structural" if structural else "finite-domain"})
    return SweepReport(trials=trials, seed=seed, checked=len(checks), skipped=len(skipped),
                       violations=tuple(violations), missed=tuple(missed))


__all__ = [
    "Instance", "SweepReport", "apply_function", "evaluate", "holds_fd",
    "program_constants", "random_instance", "soundness_sweep",
]
