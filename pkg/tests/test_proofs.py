from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from jastit.model import with_universe
from jastit.proofs import (
    GROUPS, ConstantSpec, HilbertProof, Justification, ProofFormatError, ProofStep, SkeletonTooLarge,
    axiom_groups_of, check_inconsistency_witness, check_proof, cs_contains, format_proof,
    is_axiom_instance, normalize, parse_proof,
)
from jastit.search import SearchBounds, enumerate_models
from jastit.semantics import valid_in_model
from jastit.syntax import And, Atom, Diamond, Implies, Or, parse_formula

from conftest import PROOFS
from oracles import axiom_instances, random_formula

F = parse_formula


def proof(text, **kw):
    return parse_proof(text, **kw)


@pytest.mark.parametrize("text, group, pattern", [
    ("[]p -> p", "A1", "A1/box/T"),
    ("[j](p -> q) -> [j]p -> [j]q", "A1", "A1/stit/K"),
    ("~[]p -> []~[]p", "A1", "A1/box/5"),
    ("<>p -> []<>p", "A1", "A1/box/5"),
    ("[]p -> [j]p", "A2", None),
    ("<>[j]p & <>[k]q -> <>([j]p & [k]q)", "A3", None),
    ("x:(p -> q) -> y:p -> x*y:q", "A4", None),
    ("x:p -> !x:x:p & K p", "A5", None),
    ("x:p | y:p -> (x + y):p", "A6", None),
    ("K p -> K K p", "A7", "A7/4"),
    ("K p -> []K[]p", "A8", None),
    ("[]E x -> K[]E x", "A9", None),
    ("p -> p", "A0", None),
    ("(p -> q) -> (~q -> ~p)", "A0", None),
])
def test_axiom_instance_examples(text, group, pattern):
    match = is_axiom_instance(F(text), group)
    assert match is not None and match.group == group
    if pattern is not None:
        assert match.pattern == pattern


@pytest.mark.parametrize("text, group", [
    ("[]p -> []q", "A1"),
    ("p -> q", "A0"),
    ("<>[j]p & <>[j]q -> <>([j]p & [j]q)", "A3"),
    ("x:(p -> q) -> y:p -> y*x:q", "A4"),
    ("x:p -> !y:x:p & K p", "A5"),
    ("x:p | y:p -> (y + x):q", "A6"),
    ("K p -> []K p", "A8"),
    ("[]E x -> K E x", "A9"),
    ("[]p -> [j]q", "A2"),
    ("K p -> K K q", "A7"),
])
def test_axiom_non_instances(text, group):
    assert is_axiom_instance(F(text), group) is None


def test_bindings_are_reported():
    assert is_axiom_instance(F("K p -> K p"), "A0").pattern == "A0/tautology"
    match = is_axiom_instance(F("[k](q -> p) -> [k]q -> [k]p"), "A1")
    assert dict(match.bindings) == {"A": "q", "B": "p", "agent:?j": "k"}


def test_skeleton_limit():
    big = F(" & ".join(f"p{i}" for i in range(21)) + " -> p0")
    with pytest.raises(SkeletonTooLarge):
        is_axiom_instance(big, "A0")
    assert axiom_groups_of(big) == []


@pytest.mark.parametrize("policy, text, expected", [
    ("axiomatic", "c:([]p -> p)", True),
    ("empty", "c:(p -> p)", False),
    ("iterated", "d:c:([]p -> p)", True),
    ("axiomatic", "d:c:([]p -> p)", False),
    ("axiomatic", "x:([]p -> p)", False),
    ("axiomatic", "c:([]p -> q)", False),
    ("iterated", "d:x:([]p -> p)", False),
])
def test_cs_contains_examples(policy, text, expected):
    assert cs_contains(ConstantSpec.named(policy), F(text)) is expected


def test_normality_range_on_cs():
    assert cs_contains(ConstantSpec.named("axiomatic"), F("c:(p -> p)"))
    assert not cs_contains(ConstantSpec.named("axiomatic", "A1-A9"), F("c:(p -> p)"))


def test_explicit_cs():
    cs = ConstantSpec.explicit(["c:([]p -> p)", "d:c:([]p -> p)", "c:(<>p -> []<>p)"])
    assert cs_contains(cs, F("d:c:([]p -> p)"))
    assert cs_contains(cs, F("c:(~[]~p -> []~[]~p)"))  # equal after diamond normalization
    assert not cs_contains(cs, F("c:(K p -> p)"))


@pytest.mark.parametrize("members", [
    ["d:c:([]p -> p)"],          # not closed downward
    ["x:([]p -> p)"],            # not a constant
    ["c:([]p -> q)"],            # not an axiom
])
def test_explicit_cs_rejects_bad_members(members):
    with pytest.raises(ValueError):
        ConstantSpec.explicit(members)


@pytest.mark.parametrize("text", ["A0", "A9", "MP 2 1", "KNEC 3", "BOXNEC 1", "JNEC j 2", "CS", "R4 5"])
def test_justification_round_trip(text):
    assert str(Justification.parse(text)) == text


@pytest.mark.parametrize("text", ["", "A10", "MP 1", "MP a b", "JNEC 2", "NEC 1", "CS 1"])
def test_bad_justifications(text):
    with pytest.raises(ValueError):
        Justification.parse(text)


# ---------------------------------------------------------------------------
# proof checking


def test_one_line_tautology():
    v = check_proof(proof("1. p -> p ; A0"))
    assert v.accepted and v.summary() == "accepted (1 steps)"


def test_non_tautology_rejected():
    v = check_proof(proof("1. K p -> ~[]E x ; A0"))
    assert (v.accepted, v.index, v.reason) == (False, 1, "not-axiom")
    assert v.summary().startswith("rejected at step 1: not-axiom")


@pytest.mark.parametrize("name, steps", [
    ("proof-term-historical.prf", 21),
    ("knowledge-historical.prf", 11),
    ("r4-single.prf", 2),
    ("r4-pair.prf", 4),
    ("cs-constant.prf", 3),
    ("inconsistent.prf", 1),
])
def test_fixture_proofs_accepted(name, steps):
    v = check_proof(proof((PROOFS / name).read_text()))
    assert v.accepted, v.summary()
    assert v.summary() == f"accepted ({steps} steps)"


def test_final_lines_of_lemma_fixtures():
    a = proof((PROOFS / "proof-term-historical.prf").read_text())
    b = proof((PROOFS / "knowledge-historical.prf").read_text())
    assert a.steps[-1].formula == F("x:p -> []x:p")
    assert b.steps[-1].formula == F("K p -> []K p")
    assert b.nec_enabled


def test_second_lemma_needs_necessitation():
    text = (PROOFS / "knowledge-historical.prf").read_text()
    v = check_proof(proof(text, nec_enabled=False))
    assert (v.accepted, v.index, v.reason) == (False, 5, "nec-disabled")
    assert not check_proof(proof(text.replace("@nec on", "@nec off")))


def test_cs_directive_and_override():
    text = (PROOFS / "cs-constant.prf").read_text()
    assert check_proof(proof(text))
    v = check_proof(proof(text, cs=ConstantSpec.named("axiomatic")))
    assert (v.index, v.reason) == (2, "cs-not-member")
    v = check_proof(proof(text, cs=ConstantSpec.named("empty")))
    assert (v.index, v.reason) == (1, "cs-not-member")


def test_r4_seeded_premise():
    # Step 1 is an axiom-checked seed (an A7 instance); step 2 applies R4.
    good = "1. K~[]E x -> ~[]E x ; A7\n2. K~[]E x -> ~E x ; R4 1\n"
    assert check_proof(proof(good))
    bad = "1. K~[]E x -> ~[]E x ; A7\n2. K~[]E x -> ~E y ; R4 1\n"
    assert check_proof(proof(bad)).reason == "r4-mismatch"
    shape = "1. p -> p ; A0\n2. K p -> ~E x ; R4 1\n"
    assert check_proof(proof(shape)).reason == "r4-premise-shape"


def test_r4_accepts_any_association():
    p1 = "1. K~([]E x & []E y & []E z) -> ~([]E x & []E y & []E z) ; A7\n"
    p2 = "2. (K~([]E x & []E y & []E z) -> ~([]E x & []E y & []E z)) -> K~([]E x & []E y & []E z) -> ~[]E x | (~[]E y | ~[]E z) ; A0\n"
    p3 = "3. K~([]E x & []E y & []E z) -> ~[]E x | (~[]E y | ~[]E z) ; MP 2 1\n"
    p4 = "4. K~([]E x & []E y & []E z) -> (~E x | ~E y) | ~E z ; R4 3\n"
    assert check_proof(proof(p1 + p2 + p3 + p4)), check_proof(proof(p1 + p2 + p3 + p4)).summary()
    swapped = p4.replace("(~E x | ~E y) | ~E z", "(~E y | ~E x) | ~E z")
    assert not check_proof(proof(p1 + p2 + p3 + swapped))


@pytest.mark.parametrize("text, reason, index", [
    ("1. p ; A0\n", "not-axiom", 1),
    ("1. p -> p ; A0\n3. p -> p ; A0\n", "bad-numbering", 2),
    ("1. p -> p ; MP 1 1\n", "bad-reference", 1),
    ("1. p -> p ; A0\n2. K p ; MP 1 1\n", "mp-mismatch", 2),
    ("1. p -> p ; A0\n2. K(p -> q) ; KNEC 1\n", "knec-mismatch", 2),
    ("1. p -> p ; A0\n2. [](p -> q) ; BOXNEC 1\n", "nec-mismatch", 2),
    ("1. p -> p ; A0\n2. [k](p -> p) ; JNEC j 1\n", "nec-mismatch", 2),
    ("1. Prove(j, x, p) -> Prove(j, x, p) ; A0\n", "defined-modality", 1),
    ("1. c:(p -> q) ; CS\n", "cs-not-member", 1),
])
def test_rejections(text, reason, index):
    v = check_proof(proof(text))
    assert (v.accepted, v.reason, v.index) == (False, reason, index)


def test_agent_necessitation():
    assert check_proof(proof("1. p -> p ; A0\n2. [j](p -> p) ; JNEC j 1\n"))


def test_mp_accepts_diamond_variants():
    text = "1. <>p ; A0\n"
    assert not check_proof(proof(text))
    text = "1. p -> p ; A0\n2. (p -> p) -> <>q | ~<>q ; A0\n3. ~[]~q | ~~[]~q ; MP 2 1\n"
    assert check_proof(proof(text))


def test_mutation_list_rejected():
    mutations = json.loads((PROOFS / "mutations.json").read_text())
    assert len(mutations) >= 100
    for mut in mutations:
        lines = (PROOFS / mut["proof"]).read_text().splitlines()
        prefix = f"{mut['step']}. "
        i = next(k for k, line in enumerate(lines) if line.startswith(prefix))
        assert lines[i] != mut["line"]
        lines[i] = mut["line"]
        v = check_proof(proof("\n".join(lines)))
        assert not v.accepted and v.index <= mut["step"], mut


def test_inconsistency_witness():
    pf = proof((PROOFS / "inconsistent.prf").read_text())
    p = Atom("p")
    assert check_inconsistency_witness({p, F("~p")}, pf)
    assert not check_inconsistency_witness({p}, pf)
    assert not check_inconsistency_witness({F("q")}, proof("1. q -> false ; A0"))


def test_witness_reassociation():
    text = "1. (~p & q) & p -> false ; A0"
    assert check_inconsistency_witness({Atom("p"), F("~p"), F("q")}, proof(text))


@pytest.mark.parametrize("text, line", [
    ("1. p -> p A0\n", 1),
    ("# c\n1. p -> ; A0\n", 2),
    ("@cs bogus\n", 1),
    ("@nec maybe\n1. p -> p ; A0\n", 1),
    ("1. p -> p ; MP x\n", 1),
])
def test_proof_format_errors(text, line):
    with pytest.raises(ProofFormatError) as info:
        parse_proof(text)
    assert info.value.line == line


def test_format_error_column_points_at_token():
    with pytest.raises(ProofFormatError) as info:
        parse_proof("1. p -> (q & ) ; A0")
    assert info.value.column == 13
    assert info.value.annotated().splitlines()[-1] == "  " + " " * 13 + "^"


def test_format_round_trip():
    for name in ("proof-term-historical.prf", "knowledge-historical.prf", "cs-constant.prf"):
        pf = proof((PROOFS / name).read_text())
        assert parse_proof(format_proof(pf)) == pf


def test_monotonicity_of_acceptance():
    base = proof((PROOFS / "knowledge-historical.prf").read_text())
    extra = ProofStep(len(base) + 1, F("q -> q"), Justification("AXIOM", group="A0"))
    longer = HilbertProof(base.steps + (extra,), base.nec_enabled, base.cs)
    assert check_proof(longer)
    junk = ProofStep(len(base) + 1, F("q"), Justification("AXIOM", group="A0"))
    v = check_proof(HilbertProof(base.steps + (junk,), base.nec_enabled, base.cs))
    assert v.index == len(base) + 1


# ---------------------------------------------------------------------------
# normalization


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_normalize_idempotent(seed):
    f = random_formula(random.Random(seed), 5, defined=False)
    once = normalize(f)
    assert normalize(once) == once
    assert not any(isinstance(g, Diamond) for g in [once] + list(_walk(once)))


def _walk(f):
    from jastit.syntax import subformulas
    return subformulas(f)


@pytest.mark.parametrize("group", GROUPS)
def test_matching_invariant_under_normalization(group):
    for f in axiom_instances(group, 100):
        assert is_axiom_instance(normalize(f), group) is not None
        assert (is_axiom_instance(f, group) is None) == (is_axiom_instance(normalize(f), group) is None)


@given(st.integers(0, 2**32 - 1), st.sampled_from(GROUPS))
@settings(max_examples=200, deadline=None)
def test_matching_invariant_on_random_formulas(seed, group):
    rng = random.Random(seed)
    f = random_formula(rng, 3, atoms=("p",), agents=("j",), defined=False)
    f = Implies(f, rng.choice([f, Or(f, f), And(f, f), Diamond(f)]))
    try:
        a = is_axiom_instance(f, group) is None
    except SkeletonTooLarge:
        return
    assert a == (is_axiom_instance(normalize(f), group) is None)


# ---------------------------------------------------------------------------
# accepted fixtures are valid on small models

SMALL = {cs: list(enumerate_models(SearchBounds(3, term_universe={"x"}, atom_universe={"p"}, cs=cs)))[::7]
         for cs in ("axiomatic", "iterated")}


@pytest.mark.parametrize("name", ["proof-term-historical.prf", "knowledge-historical.prf",
                                  "r4-single.prf", "r4-pair.prf", "cs-constant.prf"])
def test_fixture_conclusions_are_valid(name):
    pf = proof((PROOFS / name).read_text())
    for step in pf.steps:
        for model in SMALL[pf.cs.policy]:
            assert valid_in_model(with_universe(model, [step.formula]), step.formula), (name, step.index)
