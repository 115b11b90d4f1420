"""Command-line entry point.

Every subcommand runs the same pipeline (parse, validate, normalize,
extract) and prints one stage's result. Data goes to stdout, diagnostics
to stderr. Exit status: 0 on success, 1 on analysis errors or unreadable
input, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Sequence, TextIO

from schemalyze import __version__
from schemalyze.depgraph import QUERIES, paths, query, to_dot
from schemalyze.errors import SchemalyzeError, SoundnessViolation
from schemalyze.fd import CONST_ID_MODES, DEFAULT_DEPTH_CAP, FdSet, saturate
from schemalyze.ir import validate
from schemalyze.metafacts import MetaFactBase, declared_call_functions, extract, fd_seeds
from schemalyze.normalizer import NormalProgram, normalize
from schemalyze.oracle import soundness_sweep
from schemalyze.parser import parse_program, render_declarations

COMMANDS = ("normalize", "facts", "graph", "fds", "check", "all")
DEPTH_CAP_ENV = "SCHEMALYZE_DEPTH_CAP"

# Option defaults; None on the command line means "not given".
_DEFAULTS: dict[str, Any] = {
    "json": False,
    "show_ids": False,
    "depth_cap": DEFAULT_DEPTH_CAP,
    "seed": 0,
    "trials": 100,
    "size": 8,
    "query": None,
    "arg": [],
    "dot": False,
    "const_id_mode": "value",
    "timing": False,
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str
    json: bool = False
    show_ids: bool = False
    depth_cap: int = DEFAULT_DEPTH_CAP
    seed: int = 0
    trials: int = 100
    size: int = 8
    query: str | None = None
    arg: tuple[str, ...] = ()
    dot: bool = False
    const_id_mode: str = "value"
    timing: bool = False

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.depth_cap < 1:
            raise UsageError("depth cap must be at least 1")
        if self.trials < 0 or self.size < 0:
            raise UsageError("trials and size must be non-negative")
        if self.const_id_mode not in CONST_ID_MODES:
            raise UsageError(f"const id mode must be one of {', '.join(CONST_ID_MODES)}")
        if self.query is not None and self.query not in QUERIES:
            raise UsageError(f"unknown query {self.query!r}; expected one of {', '.join(sorted(QUERIES))}")
        if self.query is not None and self.dot:
            raise UsageError("--query and --dot are mutually exclusive")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="schemalyze", description="Static analysis of rule-defined database schemas.")
    p.add_argument("--version", action="version", version=f"schemalyze {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("input", help="schema file, or - for standard input")
    p.add_argument("--json", action="store_true", default=None, help="emit one JSON document")
    p.add_argument("--show-ids", action="store_true", default=None, help="print FD identifiers in text output")
    p.add_argument("--depth-cap", type=int, metavar="N",
                   help=f"maximum identifier nesting (default {DEFAULT_DEPTH_CAP}, env {DEPTH_CAP_ENV})")
    p.add_argument("--seed", type=int, metavar="S", help="sweep seed (default 0)")
    p.add_argument("--trials", type=int, metavar="N", help="random instances per sweep (default 100)")
    p.add_argument("--size", type=int, metavar="K", help="tuples per base relation (default 8)")
    p.add_argument("--query", metavar="NAME", help=f"graph query: {', '.join(sorted(QUERIES))}")
    p.add_argument("--arg", action="append", metavar="PRED", help="query argument (repeatable)")
    p.add_argument("--dot", action="store_true", default=None, help="emit the dependency graph as DOT")
    p.add_argument("--const-id-mode", choices=CONST_ID_MODES,
                   help="identify constant-condition FDs by value (default) or by column")
    p.add_argument("--timing", action="store_true", default=None, help="include elapsed time in check reports")
    p.add_argument("--config", metavar="FILE", help="JSON file with option defaults; flags win")
    return p


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemalyzeError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SchemalyzeError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON config: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemalyzeError(f"{path}: config must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(data) - set(_DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return data


def resolve_config(argv: Sequence[str], environ: dict[str, str] | None = None) -> RunConfig:
    """Merge flags, config file, environment and defaults (in that priority)."""
    ns = build_parser().parse_args(list(argv))
    file_opts = _load_config(ns.config)
    env = os.environ if environ is None else environ
    merged: dict[str, Any] = {}
    for key, default in _DEFAULTS.items():
        value = getattr(ns, key)
        if value is None:
            value = file_opts.get(key)
        if value is None and key == "depth_cap" and env.get(DEPTH_CAP_ENV):
            try:
                value = int(env[DEPTH_CAP_ENV])
            except ValueError as exc:
                raise UsageError(f"{DEPTH_CAP_ENV} must be an integer") from exc
        merged[key] = default if value is None else value
    if isinstance(merged["arg"], str):
        merged["arg"] = [merged["arg"]]
    merged["arg"] = tuple(merged["arg"])
    try:
        return RunConfig(command=ns.command, input=ns.input, **merged)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc


@dataclass
class Analysis:
    """Pipeline results, computed lazily so each command pays only for what it prints."""

    normal: NormalProgram
    config: RunConfig
    _facts: MetaFactBase | None = None
    _fds: FdSet | None = None
    extra: dict = field(default_factory=dict)

    @property
    def facts(self) -> MetaFactBase:
        if self._facts is None:
            self._facts = extract(self.normal)
        return self._facts

    @property
    def fds(self) -> FdSet:
        if self._fds is None:
            self._fds = saturate(self.facts, fd_seeds(self.normal), depth_cap=self.config.depth_cap,
                                 const_id_mode=self.config.const_id_mode)
        return self._fds


def _read(path: str, stdin: TextIO) -> str:
    if path == "-":
        return stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError as exc:
        raise SchemalyzeError(f"{path}: file not found") from exc
    except OSError as exc:
        raise SchemalyzeError(f"{path}: {exc.strerror}") from exc


def _dump(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# Per-command renderers: (analysis) -> JSON-able document, and text form.

def normalize_json(a: Analysis) -> dict:
    np = a.normal
    return {
        "declarations": render_declarations(np.as_program()),
        "rules": [{"kind": r.kind.value, "rule": str(r)} for r in np.rules],
        "generated": {name: str(src) for name, src in sorted(np.generated.items())},
    }


def normalize_text(a: Analysis) -> str:
    lines = render_declarations(a.normal.as_program())
    lines += [f"{r}  % {r.kind.value}" for r in a.normal.rules]
    return "".join(line + "\n" for line in lines)


def graph_json(a: Analysis) -> dict:
    cfg = a.config
    if cfg.query is not None:
        rows = query(a.facts, cfg.query, cfg.arg)
        return {"query": cfg.query, "args": list(cfg.arg), "rows": [list(r) for r in rows]}
    return {"path": [list(r) for r in sorted(paths(a.facts).closure)]}


def graph_text(a: Analysis) -> str:
    cfg = a.config
    if cfg.dot:
        return to_dot(a.facts, frozenset(a.normal.generated))
    if cfg.query is not None:
        rows = query(a.facts, cfg.query, cfg.arg)
        return "".join(f"{cfg.query}({','.join(r)}).\n" for r in rows)
    return "".join(f"path({t},{f}).\n" for t, f in sorted(paths(a.facts).closure))


def check_report(a: Analysis) -> dict:
    cfg = a.config
    start = time.perf_counter()
    report = soundness_sweep(a.normal, a.fds.facts, trials=cfg.trials, seed=cfg.seed, size=cfg.size,
                             strict=False, trusted_functions=declared_call_functions(a.normal))
    doc = report.to_json()
    doc["size"] = cfg.size
    if cfg.timing:
        doc["seconds"] = round(time.perf_counter() - start, 3)
    if report.violations:
        a.extra["violations"] = len(report.violations)
    return doc


def check_text(doc: dict) -> str:
    lines = [
        f"trials: {doc['trials']} (seed {doc['seed']}, size {doc['size']})",
        f"checked: {doc['checked']}, skipped: {doc['skipped']}",
        f"violations: {len(doc['violations'])}",
    ]
    for v in doc["violations"]:
        lines.append(f"  fd({v['pred']},{{{','.join(map(str, v['lhs']))}}},{v['rhs']}) fails in trial {v['trial']}")
    lines.append(f"missed: {len(doc['missed'])}")
    for m in doc["missed"]:
        lines.append(f"  fd({m['pred']},{{{','.join(map(str, m['lhs']))}}},{m['rhs']})  % {m['kind']}")
    if "seconds" in doc:
        lines.append(f"seconds: {doc['seconds']}")
    return "".join(line + "\n" for line in lines)


def render(a: Analysis) -> str:
    cfg = a.config
    cmd = cfg.command
    if cmd == "all":
        return _dump({
            "normalize": normalize_json(a),
            "facts": a.facts.to_json(),
            "graph": graph_json(a),
            "fds": a.fds.to_json(),
            "check": check_report(a),
        })
    if cmd == "normalize":
        return _dump(normalize_json(a)) if cfg.json else normalize_text(a)
    if cmd == "facts":
        return _dump(a.facts.to_json()) if cfg.json else a.facts.render()
    if cmd == "graph":
        if cfg.json and not cfg.dot:
            return _dump(graph_json(a))
        return graph_text(a)
    if cmd == "fds":
        return _dump(a.fds.to_json()) if cfg.json else a.fds.render(cfg.show_ids)
    doc = check_report(a)
    return _dump(doc) if cfg.json else check_text(doc)


def _describe(exc: SchemalyzeError, source: str) -> str:
    where = f"{source}:" if source != "-" else "<stdin>:"
    text = f"error: {where}{exc}" if exc.span is not None else f"error: {exc}"
    if isinstance(exc, SoundnessViolation):
        text += "\n" + _dump(exc.witness).rstrip("\n")
    return text


def run(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None,
        stdin: TextIO | None = None, environ: dict[str, str] | None = None) -> int:
    """Run one command; returns the exit status."""
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv, environ)
    except UsageError as exc:
        err.write(f"{build_parser().format_usage()}schemalyze: error: {exc}\n")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except SchemalyzeError as exc:
        err.write(f"error: {exc}\n")
        return 1
    try:
        text = _read(cfg.input, stdin or sys.stdin)
        vp = validate(parse_program(text))
        analysis = Analysis(normalize(vp), cfg)
        result = render(analysis)
    except SchemalyzeError as exc:
        err.write(_describe(exc, cfg.input) + "\n")
        return 1
    out.write(result)
    for diag in analysis.fds.diagnostics if analysis._fds is not None else ():
        err.write(f"warning: {diag}\n")
    if analysis.extra.get("violations"):
        err.write(f"error: {analysis.extra['violations']} soundness violation(s)\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
