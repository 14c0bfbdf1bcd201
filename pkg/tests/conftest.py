from __future__ import annotations

import json
from importlib.resources import files
from pathlib import Path

import pytest

from jastit.model import load_model

DATA = Path(str(files("jastit") / "data"))
MODELS = DATA / "models"
PROOFS = DATA / "proofs"

MUTANTS = {
    "M1-mutant-connection.json": "Historical connection",
    "M1-mutant-backward.json": "No backward branching",
    "M1-mutant-undivided.json": "No choice between undivided histories",
    "M1-mutant-independence.json": "Independence of agents",
    "M1-mutant-monotonicity.json": "Monotonicity of evidence",
    "M1-mutant-closure.json": "Evidence closure properties",
    "M1-mutant-act.json": "Expansion of presented proofs",
    "M1-mutant-new-proofs.json": "No new proofs guaranteed",
    "M1-mutant-divide.json": "Presenting a new proof makes histories divide",
    "M1-mutant-future.json": "Future always matters",
    "M1-mutant-transparency.json": "Presented proofs are epistemically transparent",
}


def read_model(name: str):
    return load_model((MODELS / name).read_text())


def m1_document() -> dict:
    return json.loads((MODELS / "M1.json").read_text())


@pytest.fixture
def m1():
    return read_model("M1.json")


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
