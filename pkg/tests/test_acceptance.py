"""Acceptance criteria 1 to 9.

Each criterion runs under its own time budget and reports one line of the
form ``PASS criterion N: ...`` or ``FAIL criterion N: ...``. Under pytest the
lines are gathered into the terminal summary. Running this file directly
(``python tests/test_acceptance.py``) prints them as they complete.
"""

from __future__ import annotations

import json
import random
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jastit.model import CONSTRAINTS, validate, with_universe  # noqa: E402
from jastit.proofs import GROUPS, check_proof, parse_proof  # noqa: E402
from jastit.search import SearchBounds, SearchStats, enumerate_models, find_model, random_models  # noqa: E402
from jastit.semantics import (  # noqa: E402
    expand_defined, extension, proves_literal, proves_simplified, valid_in_model,
)
from jastit.syntax import (  # noqa: E402
    Check, Const, Prove, Proven, Sum, Var, parse_formula, print_formula,
)

from conftest import ACCEPTANCE_LINES, MUTANTS, PROOFS, read_model  # noqa: E402
from oracles import axiom_instances, naive_holds, projection_key, random_formula, reads  # noqa: E402


def _report(n: int, ok: bool, detail: str, seconds: float, budget: float) -> str:
    timed = seconds < budget
    word = "PASS" if ok and timed else "FAIL"
    line = f"{word} criterion {n}: {detail} [{seconds:.2f}s / {budget:g}s]"
    ACCEPTANCE_LINES.append(line)
    return line


def _run(n: int, budget: float, body) -> tuple:
    start = time.perf_counter()
    ok, detail = body()
    seconds = time.perf_counter() - start
    line = _report(n, ok, detail, seconds, budget)
    return ok, seconds, line


# ---------------------------------------------------------------------------
# 1. parser round trip


def c1_round_trip():
    rng = random.Random(20261016)
    bad = []
    for _ in range(1000):
        f = random_formula(rng, rng.randint(3, 8))
        text = print_formula(f)
        if parse_formula(text) != f:
            bad.append(text)
    return not bad, f"1000 random formulas round-trip, {len(bad)} mismatches"


# ---------------------------------------------------------------------------
# 2. constraint mutants


def c2_mutants():
    clean = validate(read_model("M1.json")).ok
    wrong = {name: sorted(validate(read_model(name)).names()) for name, want in MUTANTS.items()
             if validate(read_model(name)).names() != {want}}
    covered = set(MUTANTS.values()) == set(CONSTRAINTS[:11])
    ok = clean and not wrong and covered and len(MUTANTS) == 11
    return ok, f"M1 clean={clean}, {11 - len(wrong)}/11 mutants report exactly their constraint"


# ---------------------------------------------------------------------------
# 3. soundness sampling


def _sound(models, instances, memo):
    failures = checked = 0
    for f in instances:
        need = reads(f)
        for model in models:
            key = (f, projection_key(model, need))
            if key not in memo:
                memo[key] = valid_in_model(with_universe(model, [f]), f).valid
            checked += 1
            failures += not memo[key]
    return failures, checked


def c3_soundness():
    small = list(enumerate_models(SearchBounds(3, term_universe={"x"}, atom_universe={"p"})))
    sampled = list(random_models(SearchBounds(5, term_universe={"x"}, atom_universe={"p"},
                                              mode="randomized", sample_count=200, seed=3)))
    failures = checked = 0
    per_group = []
    for group in GROUPS:
        instances = axiom_instances(group, 100)
        per_group.append(len(instances))
        memo: dict = {}
        for models in (small, sampled):
            f, c = _sound(models, instances, memo)
            failures += f
            checked += c
    ok = failures == 0 and min(per_group) >= 100 and len(sampled) == 200
    return ok, (f"{sum(per_group)} instances over {len(GROUPS)} groups on {len(small)} enumerated"
                f" + {len(sampled)} random models, {checked} checks, {failures} failures")


# ---------------------------------------------------------------------------
# 4. discrete-time validity


def c4_discrete_time():
    f = parse_formula("K(~[]E x | []E y) -> (~E x | E y)")
    count = failures = 0
    for model in enumerate_models(SearchBounds(4, term_universe={"x", "y"})):
        count += 1
        failures += not valid_in_model(model, f).valid
    return failures == 0 and count > 0, f"{print_formula(f)} on {count} models, {failures} failures"


# ---------------------------------------------------------------------------
# 5. finite-history probe


def c5_finite_histories():
    stats = SearchStats()
    found = find_model(parse_formula("K(<>p & <>~p)"), SearchBounds(4), stats)
    return found is None, f"K(<>p & <>~p) at <= 4 moments: {'none' if found is None else 'found'}" \
                          f" after {stats.models} models"


# ---------------------------------------------------------------------------
# 6. proof fixtures and mutations


def c6_fixtures():
    texts = {name: (PROOFS / name).read_text()
             for name in ("proof-term-historical.prf", "knowledge-historical.prf")}
    first = check_proof(parse_proof(texts["proof-term-historical.prf"]))
    second = check_proof(parse_proof(texts["knowledge-historical.prf"], nec_enabled=True))
    mutations = json.loads((PROOFS / "mutations.json").read_text())
    missed = 0
    for mut in mutations:
        lines = (PROOFS / mut["proof"]).read_text().splitlines()
        i = next(k for k, line in enumerate(lines) if line.startswith(f"{mut['step']}. "))
        lines[i] = mut["line"]
        verdict = check_proof(parse_proof("\n".join(lines)))
        missed += verdict.accepted or verdict.index > mut["step"]
    ok = first.accepted and second.accepted and missed == 0 and len(mutations) > 0
    return ok, (f"fixtures accepted={first.accepted and second.accepted},"
                f" {len(mutations) - missed}/{len(mutations)} mutations rejected in time")


# ---------------------------------------------------------------------------
# 7 and 8. definability and unirelational agreement

TERMS = (Var("x"), Var("y"), Sum(Var("x"), Var("y")), Check(Var("x")), Const("c"))
BODIES = [parse_formula(s) for s in ("p", "q", "E x", "~E y", "[]p", "K q", "[j]E x", "x:p", "p -> q")]
RICH = dict(max_moments=5, agents=("j", "k"), term_universe={"x", "y"}, atom_universe={"p", "q"},
            mode="randomized", sample_count=500)


def c7_definability():
    models = list(random_models(SearchBounds(seed=7, **RICH)))
    probes = [g for t in TERMS for a in BODIES for g in (Prove("j", t, a), Proven(t, a))]
    bad = sum(extension(m, g) != extension(m, expand_defined(g)) for m in models for g in probes)
    return bad == 0 and len(models) == 500, \
        f"{len(probes)} Prove/Proven probes on {len(models)} random models, {bad} disagreements"


def c8_unirelational():
    models = list(random_models(SearchBounds(seed=8, relations="uni", **RICH)))
    bad = points = 0
    for m in models:
        for p in m.points:
            points += 1
            bad += sum(proves_literal(m, p, t, a) != proves_simplified(m, p, t, a)
                       for t in TERMS for a in BODIES)
    uni = all(m.unirelational and m.re == m.r for m in models)
    return bad == 0 and uni and len(models) == 500, \
        f"{len(models)} unirelational models, {points} points, {bad} disagreements"


# ---------------------------------------------------------------------------
# 9. naive oracle agreement

FIXED_PROBES = (
    "p", "E x", "[]E x", "K p", "x:p", "[j]p", "<>~E x", "Prove(j, x, p)", "Proven(x, p)",
    "c:([]p -> p)", "!x:x:p", "K(<>p & <>~p)", "[j]E x & <>~E x", "(x + c):p", "x*x:p -> K p",
)


def c9_naive_oracle():
    rng = random.Random(9)
    probes = [parse_formula(s) for s in FIXED_PROBES]
    while len(probes) < 50:
        f = random_formula(rng, 4, atoms=("p",), agents=("j",), vars=("x",), consts=("c",), term_depth=1)
        if f not in probes:
            probes.append(f)
    models = list(enumerate_models(SearchBounds(3, term_universe={"x"}, atom_universe={"p"})))
    bad = 0
    for model in models:
        for f in probes:
            ext = extension(model, f)
            bad += sum((p in ext) != naive_holds(model, p.moment, p.history, f) for p in model.points)
    return bad == 0, f"{len(probes)} probes on {len(models)} models, {bad} disagreements"


CRITERIA = [
    (1, 5, c1_round_trip),
    (2, 1, c2_mutants),
    (3, 300, c3_soundness),
    (4, 600, c4_discrete_time),
    (5, 600, c5_finite_histories),
    (6, 1, c6_fixtures),
    (7, 60, c7_definability),
    (8, 60, c8_unirelational),
    (9, 120, c9_naive_oracle),
]


@pytest.mark.parametrize("n, budget, body", CRITERIA, ids=[f"criterion-{n}" for n, _, _ in CRITERIA])
def test_acceptance(n, budget, body):
    ok, seconds, line = _run(n, budget, body)
    print(line)
    assert ok, line
    assert seconds < budget, line


if __name__ == "__main__":
    results = []
    for n, budget, body in CRITERIA:
        ok, seconds, line = _run(n, budget, body)
        print(line, flush=True)
        results.append(ok and seconds < budget)
    sys.exit(0 if all(results) else 1)
