from __future__ import annotations

from pathlib import Path

import pytest

from schemalyze.fd import saturate
from schemalyze.ir import validate
from schemalyze.metafacts import extract, fd_seeds
from schemalyze.normalizer import normalize
from schemalyze.parser import parse_program

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(name: str) -> str:
    return (CORPUS / name).read_text(encoding="utf-8")


def pipeline(text: str, **saturate_opts):
    """(normal program, meta-facts, fd set) for source text."""
    np = normalize(validate(parse_program(text)))
    mf = extract(np)
    return np, mf, saturate(mf, fd_seeds(np), **saturate_opts)


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


# Acceptance criteria record one line each here; printed after the run.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
