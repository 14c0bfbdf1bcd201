"""Hilbert-style proof checking for the JA-STIT axiom system.

Axiom groups are addressed by their labels ``A0`` .. ``A9``; rules are
modus ponens, K-necessitation, constant-specification introduction, the
``R4`` rule, and (behind ``nec_enabled``) necessitation for ``[]`` and
``[j]``.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .syntax import (
    And, App, Atom, Box, Check, Const, Diamond, E, Falsum, Formula, Implies,
    K, Not, Or, ParseError, Prove, Proven, Proves, Stit, Sum, parse_formula, subformulas,
)

__all__ = [
    "GROUPS", "SkeletonTooLarge", "AxiomMatch", "normalize", "is_axiom_instance",
    "axiom_groups_of", "is_axiom", "ConstantSpec", "cs_contains",
    "Justification", "ProofStep", "HilbertProof", "ProofVerdict",
    "ProofFormatError", "check_proof", "parse_proof", "format_proof",
    "check_inconsistency_witness", "flatten_and", "flatten_or",
]

GROUPS = tuple(f"A{i}" for i in range(10))
MAX_SKELETON_LETTERS = 20


class SkeletonTooLarge(ValueError):
    """The boolean skeleton of a candidate A0 instance has too many letters."""


# ---------------------------------------------------------------------------
# Diamond normalization


@functools.lru_cache(maxsize=65536)
def normalize(f: Formula) -> Formula:
    """Rewrite every ``<>A`` as ``~[]~A``, recursively."""
    if isinstance(f, Diamond):
        return Not(Box(Not(normalize(f.body))))
    if isinstance(f, (Atom, Falsum, E)):
        return f
    if isinstance(f, Not):
        return Not(normalize(f.body))
    if isinstance(f, And):
        return And(normalize(f.left), normalize(f.right))
    if isinstance(f, Or):
        return Or(normalize(f.left), normalize(f.right))
    if isinstance(f, Implies):
        return Implies(normalize(f.left), normalize(f.right))
    if isinstance(f, Stit):
        return Stit(f.agent, normalize(f.body))
    if isinstance(f, Box):
        return Box(normalize(f.body))
    if isinstance(f, K):
        return K(normalize(f.body))
    if isinstance(f, Proves):
        return Proves(f.term, normalize(f.body))
    if isinstance(f, Prove):
        return Prove(f.agent, f.term, normalize(f.body))
    if isinstance(f, Proven):
        return Proven(f.term, normalize(f.body))
    raise TypeError(f"not a formula: {f!r}")


def flatten_and(f: Formula) -> list:
    if isinstance(f, And):
        return flatten_and(f.left) + flatten_and(f.right)
    return [f]


def flatten_or(f: Formula) -> list:
    if isinstance(f, Or):
        return flatten_or(f.left) + flatten_or(f.right)
    return [f]


# ---------------------------------------------------------------------------
# A0: boolean skeleton truth table

_BOOLEAN = (Not, And, Or, Implies, Falsum)


def _skeleton_letters(f: Formula, letters: dict) -> None:
    if isinstance(f, Falsum):
        return
    if isinstance(f, _BOOLEAN):
        for c in (f.body,) if isinstance(f, Not) else (f.left, f.right):
            _skeleton_letters(c, letters)
    elif f not in letters:
        letters[f] = len(letters)


def _is_tautology(f: Formula) -> bool:
    letters: dict = {}
    _skeleton_letters(f, letters)
    n = len(letters)
    if n > MAX_SKELETON_LETTERS:
        raise SkeletonTooLarge(f"boolean skeleton has {n} letters (limit {MAX_SKELETON_LETTERS})")
    rows = 1 << n
    full = (1 << rows) - 1
    # column i is the truth of letter i across all 2**n rows, packed in an int
    columns = {}
    for g, i in letters.items():
        block = (1 << (1 << i)) - 1
        period = 1 << (i + 1)
        col = 0
        for start in range(1 << i, rows, period):
            col |= block << start
        columns[g] = col

    def ev(g):
        if isinstance(g, Falsum):
            return 0
        if isinstance(g, Not):
            return full & ~ev(g.body)
        if isinstance(g, And):
            return ev(g.left) & ev(g.right)
        if isinstance(g, Or):
            return ev(g.left) | ev(g.right)
        if isinstance(g, Implies):
            return (full & ~ev(g.left)) | ev(g.right)
        return columns[g]

    return ev(f) == full


# ---------------------------------------------------------------------------
# Schematic patterns


@dataclass(frozen=True)
class _MF:
    name: str


@dataclass(frozen=True)
class _MT:
    name: str


def _match_term(pat, t, b: dict) -> bool:
    if isinstance(pat, _MT):
        key = "term:" + pat.name
        if key in b:
            return b[key] == t
        b[key] = t
        return True
    if type(pat) is not type(t):
        return False
    if isinstance(pat, (Sum, App)):
        return _match_term(pat.left, t.left, b) and _match_term(pat.right, t.right, b)
    if isinstance(pat, Check):
        return _match_term(pat.inner, t.inner, b)
    return pat == t


def _match(pat, f, b: dict) -> bool:
    if isinstance(pat, _MF):
        if pat.name in b:
            return b[pat.name] == f
        b[pat.name] = f
        return True
    if type(pat) is not type(f):
        return False
    if isinstance(pat, Stit):
        if pat.agent.startswith("?"):
            key = "agent:" + pat.agent
            if b.setdefault(key, f.agent) != f.agent:
                return False
        elif pat.agent != f.agent:
            return False
        return _match(pat.body, f.body, b)
    if isinstance(pat, (Proves, E)):
        if not _match_term(pat.term, f.term, b):
            return False
        return isinstance(pat, E) or _match(pat.body, f.body, b)
    if isinstance(pat, (And, Or, Implies)):
        return _match(pat.left, f.left, b) and _match(pat.right, f.right, b)
    if isinstance(pat, (Not, Box, K)):
        return _match(pat.body, f.body, b)
    return pat == f


_A, _B = _MF("A"), _MF("B")
_s, _t = _MT("s"), _MT("t")


def _s5(name: str, box) -> list:
    return [
        (f"{name}/K", Implies(box(Implies(_A, _B)), Implies(box(_A), box(_B)))),
        (f"{name}/T", Implies(box(_A), _A)),
        (f"{name}/4", Implies(box(_A), box(box(_A)))),
        (f"{name}/5", Implies(Not(box(_A)), box(Not(box(_A))))),
    ]


def _stit(body):
    return Stit("?j", body)


_PATTERNS = {
    "A1": _s5("A1/box", Box) + _s5("A1/stit", _stit),
    "A2": [("A2", Implies(Box(_A), Stit("?j", _A)))],
    "A4": [("A4", Implies(Proves(_s, Implies(_A, _B)),
                          Implies(Proves(_t, _A), Proves(App(_s, _t), _B))))],
    "A5": [("A5", Implies(Proves(_t, _A),
                          And(Proves(Check(_t), Proves(_t, _A)), K(_A))))],
    "A6": [("A6", Implies(Or(Proves(_s, _A), Proves(_t, _A)), Proves(Sum(_s, _t), _A)))],
    "A7": [
        ("A7/K", Implies(K(Implies(_A, _B)), Implies(K(_A), K(_B)))),
        ("A7/T", Implies(K(_A), _A)),
        ("A7/4", Implies(K(_A), K(K(_A)))),
    ],
    "A8": [("A8", Implies(K(_A), Box(K(Box(_A)))))],
    "A9": [("A9", Implies(Box(E(_t)), K(Box(E(_t)))))],
}


def _possibly(f):
    return Not(Box(Not(f)))


def _match_a3(f: Formula) -> Optional[dict]:
    if not isinstance(f, Implies):
        return None
    cons = f.right
    if not (isinstance(cons, Not) and isinstance(cons.body, Box)
            and isinstance(cons.body.body, Not)):
        return None
    inner = flatten_and(cons.body.body.body)
    outer = flatten_and(f.left)
    if len(inner) != len(outer):
        return None
    agents = []
    for stit, prem in zip(inner, outer):
        if not isinstance(stit, Stit) or prem != _possibly(stit):
            return None
        agents.append(stit.agent)
    if len(set(agents)) != len(agents):
        return None
    return {"agents": tuple(agents), "n": len(agents)}


@dataclass(frozen=True)
class AxiomMatch:
    """A successful scheme match: group label, concrete pattern, bindings."""

    group: str
    pattern: str
    bindings: tuple = ()

    def __bool__(self):
        return True


def is_axiom_instance(f: Formula, group: str) -> Optional[AxiomMatch]:
    """Return an :class:`AxiomMatch` if ``f`` instantiates ``group``, else None.

    Matching is done on diamond-normalized forms. A0 raises
    :class:`SkeletonTooLarge` when the boolean skeleton is too wide to
    truth-table.
    """
    if group not in GROUPS:
        raise ValueError(f"unknown axiom group {group!r}")
    return _match_group(normalize(f), group)


@functools.lru_cache(maxsize=65536)
def _match_group(f: Formula, group: str) -> Optional[AxiomMatch]:
    if group == "A0":
        return AxiomMatch("A0", "A0/tautology") if _is_tautology(f) else None
    if group == "A3":
        b = _match_a3(f)
        return None if b is None else AxiomMatch("A3", "A3", tuple(sorted(b.items())))
    for name, pat in _PATTERNS[group]:
        b: dict = {}
        if _match(pat, f, b):
            return AxiomMatch(group, name, tuple(sorted((k, str(v)) for k, v in b.items())))
    return None


def axiom_groups_of(f: Formula, groups: Iterable[str] = GROUPS) -> list:
    """All matches of ``f`` among ``groups``; A0 overflow counts as no match."""
    out = []
    for g in groups:
        try:
            m = is_axiom_instance(f, g)
        except SkeletonTooLarge:
            m = None
        if m:
            out.append(m)
    return out


def is_axiom(f: Formula, groups: Iterable[str] = GROUPS) -> bool:
    g = normalize(f)
    for group in groups:
        try:
            if _match_group(g, group):
                return True
        except SkeletonTooLarge:
            continue
    return False


# ---------------------------------------------------------------------------
# Constant specifications

_POLICIES = ("empty", "axiomatic", "iterated", "explicit")
_RANGES = {"A0-A9": GROUPS, "A1-A9": GROUPS[1:]}


def _peel_constants(f: Formula) -> list:
    """Successive bodies of ``c_n:...:c_1:A``, outermost first (n >= 1 each)."""
    out = []
    while isinstance(f, Proves) and isinstance(f.term, Const):
        f = f.body
        out.append(f)
    return out


@dataclass(frozen=True)
class ConstantSpec:
    """A constant specification.

    ``policy`` is one of ``empty``, ``axiomatic`` (the depth-1 set realizing
    R3), ``iterated`` (all ``c_n:...:c_1:A``) or ``explicit`` (the finite
    ``members``). ``normality_range`` picks which groups count as axioms.
    """

    policy: str = "axiomatic"
    members: frozenset = frozenset()
    normality_range: str = "A0-A9"

    def __post_init__(self):
        if self.policy not in _POLICIES:
            raise ValueError(f"unknown constant-spec policy {self.policy!r}")
        if self.normality_range not in _RANGES:
            raise ValueError(f"unknown normality range {self.normality_range!r}")
        if self.policy == "explicit":
            object.__setattr__(self, "members", frozenset(normalize(m) for m in self.members))
            for m in self.members:
                bodies = _peel_constants(m)
                if not bodies or not is_axiom(bodies[-1], self.groups):
                    raise ValueError(f"not of shape c_n:...:c_1:A with A an axiom: {m}")
                if len(bodies) > 1 and bodies[0] not in self.members:
                    raise ValueError(f"constant specification not downward closed at {m}")
        elif self.members:
            raise ValueError("members are only meaningful for the explicit policy")

    @property
    def groups(self) -> tuple:
        return _RANGES[self.normality_range]

    @classmethod
    def named(cls, name: str, normality_range: str = "A0-A9") -> "ConstantSpec":
        return cls(policy=name, normality_range=normality_range)

    @classmethod
    def explicit(cls, members: Iterable, normality_range: str = "A0-A9") -> "ConstantSpec":
        members = [parse_formula(m) if isinstance(m, str) else m for m in members]
        return cls("explicit", frozenset(members), normality_range)


@functools.lru_cache(maxsize=65536)
def cs_contains(cs: ConstantSpec, f: Formula) -> bool:
    """Membership of ``f`` in the constant specification ``cs``."""
    if cs.policy == "empty":
        return False
    if cs.policy == "explicit":
        return normalize(f) in cs.members
    bodies = _peel_constants(f)
    if not bodies:
        return False
    if cs.policy == "axiomatic":
        return is_axiom(bodies[0], cs.groups)
    return any(is_axiom(b, cs.groups) for b in bodies)


# ---------------------------------------------------------------------------
# Proofs

_RULES = {"AXIOM", "MP", "KNEC", "CS", "R4", "BOXNEC", "JNEC"}


@dataclass(frozen=True)
class Justification:
    """``rule`` is ``AXIOM`` (with ``group``), ``MP``, ``KNEC``, ``CS``,
    ``R4``, ``BOXNEC`` or ``JNEC`` (with ``agent``); ``refs`` are cited
    step indices."""

    rule: str
    refs: tuple = ()
    group: Optional[str] = None
    agent: Optional[str] = None

    def __str__(self):
        if self.rule == "AXIOM":
            return self.group
        parts = [self.rule]
        if self.agent is not None:
            parts.append(self.agent)
        parts.extend(str(r) for r in self.refs)
        return " ".join(parts)

    @classmethod
    def parse(cls, text: str) -> "Justification":
        words = text.split()
        if not words:
            raise ValueError("empty justification")
        head = words[0].upper()
        if head in GROUPS and len(words) == 1:
            return cls("AXIOM", group=head)
        try:
            if head == "CS" and len(words) == 1:
                return cls("CS")
            if head in ("KNEC", "R4", "BOXNEC") and len(words) == 2:
                return cls(head, (int(words[1]),))
            if head == "MP" and len(words) == 3:
                return cls("MP", (int(words[1]), int(words[2])))
            if head == "JNEC" and len(words) == 3:
                return cls("JNEC", (int(words[2]),), agent=words[1])
        except ValueError:
            pass
        raise ValueError(f"bad justification {text!r}")


@dataclass(frozen=True)
class ProofStep:
    index: int
    formula: Formula
    justification: Justification


@dataclass(frozen=True)
class HilbertProof:
    steps: tuple
    nec_enabled: bool = True
    cs: ConstantSpec = field(default_factory=ConstantSpec)

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class ProofVerdict:
    accepted: bool
    steps: int
    index: Optional[int] = None
    reason: Optional[str] = None
    detail: str = ""
    matches: tuple = ()

    def __bool__(self):
        return self.accepted

    def summary(self) -> str:
        if self.accepted:
            return f"accepted ({self.steps} steps)"
        return f"rejected at step {self.index}: {self.reason} ({self.detail})"


def _reject(n, k, reason, detail=""):
    return ProofVerdict(False, n, k, reason, detail)


def _has_defined(f: Formula) -> bool:
    return any(isinstance(g, (Prove, Proven)) for g in subformulas(f))


def _same(a: Formula, b: Formula) -> bool:
    return normalize(a) == normalize(b)


def _r4_terms(d: Formula, boxed: bool) -> Optional[list]:
    terms = []
    for lit in flatten_or(d):
        if not isinstance(lit, Not):
            return None
        g = lit.body
        if boxed:
            if not isinstance(g, Box):
                return None
            g = g.body
        if not isinstance(g, E):
            return None
        terms.append(g.term)
    return terms


def _check_step(proof: HilbertProof, k: int, formulas: list) -> Optional[tuple]:
    """Return ``(reason, detail)`` if step ``k`` (1-based) does not check."""
    step = proof.steps[k - 1]
    f = step.formula
    j = step.justification
    if _has_defined(f):
        return "defined-modality", "Prove/Proven may not occur in proofs"
    for r in j.refs:
        if not 1 <= r < k:
            return "bad-reference", f"step {r} is not an earlier step"
    prior = [formulas[r - 1] for r in j.refs]

    if j.rule == "AXIOM":
        try:
            m = is_axiom_instance(f, j.group)
        except SkeletonTooLarge as exc:
            return "skeleton-too-large", str(exc)
        if not m:
            return "not-axiom", f"not an instance of {j.group}"
        return None
    if j.rule == "MP":
        imp, minor = prior
        if not _same(imp, Implies(minor, f)):
            return "mp-mismatch", f"step {j.refs[0]} is not step {j.refs[1]} -> current"
        return None
    if j.rule == "KNEC":
        return None if _same(f, K(prior[0])) else ("knec-mismatch", "expected K of the cited step")
    if j.rule == "CS":
        return None if cs_contains(proof.cs, f) else ("cs-not-member", f"not in the {proof.cs.policy} constant specification")
    if j.rule in ("BOXNEC", "JNEC"):
        if not proof.nec_enabled:
            return "nec-disabled", "necessitation for [] and [j] is switched off"
        expect = Box(prior[0]) if j.rule == "BOXNEC" else Stit(j.agent, prior[0])
        return None if _same(f, expect) else ("nec-mismatch", f"expected {expect}")
    if j.rule == "R4":
        prem = normalize(prior[0])
        cur = normalize(f)
        if not (isinstance(prem, Implies) and isinstance(prem.left, K)):
            return "r4-premise-shape", "premise is not KA -> (~[]E t1 | ... | ~[]E tn)"
        boxed = _r4_terms(prem.right, boxed=True)
        if boxed is None:
            return "r4-premise-shape", "premise is not KA -> (~[]E t1 | ... | ~[]E tn)"
        if not (isinstance(cur, Implies) and cur.left == prem.left):
            return "r4-mismatch", "conclusion must keep the premise's KA"
        plain = _r4_terms(cur.right, boxed=False)
        if plain != boxed:
            return "r4-mismatch", "conclusion must be KA -> (~E t1 | ... | ~E tn) with the same terms"
        return None
    return "bad-justification", str(j)


def check_proof(proof: HilbertProof) -> ProofVerdict:
    """Check every step; reject at the first one that fails."""
    formulas = []
    n = len(proof.steps)
    for k, step in enumerate(proof.steps, 1):
        if step.index != k:
            return _reject(n, k, "bad-numbering", f"expected step {k}, found {step.index}")
        bad = _check_step(proof, k, formulas)
        if bad is not None:
            return _reject(n, k, *bad)
        formulas.append(step.formula)
    return ProofVerdict(True, n)


def check_inconsistency_witness(gamma: Iterable[Formula], proof: HilbertProof) -> bool:
    """True iff ``proof`` is accepted and ends in ``(A1 & ... & An) -> false``
    with every ``Ai`` drawn from ``gamma``."""
    if not proof.steps or not check_proof(proof):
        return False
    last = normalize(proof.steps[-1].formula)
    if not (isinstance(last, Implies) and isinstance(last.right, Falsum)):
        return False
    members = {normalize(g) for g in gamma}
    return all(c in members for c in flatten_and(last.left))


# ---------------------------------------------------------------------------
# Proof files


class ProofFormatError(ValueError):
    def __init__(self, message: str, line: int, column: Optional[int] = None, text: str = ""):
        self.line = line
        self.column = column
        self.text = text
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")

    def annotated(self) -> str:
        if self.column is None or not self.text:
            return str(self)
        return f"{self}\n  {self.text}\n  {' ' * self.column}^"


_STEP_RE = re.compile(r"\s*(\d+)\.\s*(.*);\s*([^;]*?)\s*$")


def parse_proof(text: str, cs: Optional[ConstantSpec] = None,
                nec_enabled: Optional[bool] = None) -> HilbertProof:
    """Read the line-oriented proof format.

    ``cs`` and ``nec_enabled``, when given, override the ``@cs`` / ``@nec``
    header directives.
    """
    steps = []
    cs_name = "axiomatic"
    nec = True
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            words = line[1:].split()
            if len(words) == 2 and words[0] == "cs" and words[1] in ("empty", "axiomatic", "iterated"):
                cs_name = words[1]
            elif len(words) == 2 and words[0] == "nec" and words[1] in ("on", "off"):
                nec = words[1] == "on"
            else:
                raise ProofFormatError(f"bad directive {line!r}", lineno)
            continue
        m = _STEP_RE.match(raw)
        if m is None:
            raise ProofFormatError("expected 'N. <formula> ; <justification>'", lineno)
        try:
            formula = parse_formula(m.group(2))
        except ParseError as exc:
            col = m.start(2) + exc.position
            raise ProofFormatError(exc.message, lineno, col, raw) from None
        try:
            just = Justification.parse(m.group(3))
        except ValueError as exc:
            raise ProofFormatError(str(exc), lineno, m.start(3), raw) from None
        steps.append(ProofStep(int(m.group(1)), formula, just))
    return HilbertProof(
        tuple(steps),
        nec_enabled=nec if nec_enabled is None else nec_enabled,
        cs=cs if cs is not None else ConstantSpec.named(cs_name),
    )


def format_proof(proof: HilbertProof) -> str:
    """Inverse of :func:`parse_proof` for the named constant specifications."""
    if proof.cs.policy == "explicit":
        raise ValueError("explicit constant specifications have no file directive")
    lines = [f"@cs {proof.cs.policy}", f"@nec {'on' if proof.nec_enabled else 'off'}"]
    for s in proof.steps:
        lines.append(f"{s.index}. {s.formula} ; {s.justification}")
    return "\n".join(lines) + "\n"
