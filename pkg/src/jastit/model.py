"""Finite jstit models: loading, histories, evidence, and the validator."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Optional

from .proofs import ConstantSpec, cs_contains
from .syntax import (
    AgentSet, App, Atom, Check, Const, Formula, Implies, ProofTerm, Proves, Sum,
    closure_universe, is_atom_name, parse_formula, parse_term, print_formula,
    print_term,
)

__all__ = [
    "ModelError", "History", "EvalPoint", "JstitModel", "Violation",
    "ValidationReport", "CONSTRAINTS", "build_model", "load_model",
    "histories", "evidence_holds", "validate", "reflexive_transitive_closure",
    "with_universe", "saturate_evidence",
]

# Constraint headings as they are named in the model-class definition.
HISTORICAL_CONNECTION = "Historical connection"
NO_BACKWARD_BRANCHING = "No backward branching"
NO_CHOICE_UNDIVIDED = "No choice between undivided histories"
INDEPENDENCE = "Independence of agents"
EVIDENCE_MONOTONICITY = "Monotonicity of evidence"
EVIDENCE_CLOSURE = "Evidence closure properties"
EXPANSION = "Expansion of presented proofs"
NO_NEW_PROOFS = "No new proofs guaranteed"
DIVIDE = "Presenting a new proof makes histories divide"
FUTURE_MATTERS = "Future always matters"
TRANSPARENCY = "Presented proofs are epistemically transparent"
R_SUBSET_RE = "Inclusion of R in R_e"
CHOICE_PARTITION = "Choice is a partition"

CONSTRAINTS = (
    HISTORICAL_CONNECTION, NO_BACKWARD_BRANCHING, NO_CHOICE_UNDIVIDED,
    INDEPENDENCE, EVIDENCE_MONOTONICITY, EVIDENCE_CLOSURE, EXPANSION,
    NO_NEW_PROOFS, DIVIDE, FUTURE_MATTERS, TRANSPARENCY,
)


class ModelError(ValueError):
    """A model document is malformed or structurally inconsistent."""


class History(NamedTuple):
    id: str
    chain: tuple


class EvalPoint(NamedTuple):
    moment: str
    history: str

    def __str__(self):
        return f"{self.moment}/{self.history}"


def reflexive_transitive_closure(elements: Iterable, pairs: Iterable) -> frozenset:
    elements = list(elements)
    succ = {e: {e} for e in elements}
    for a, b in pairs:
        succ[a].add(b)
    # Warshall over the adjacency sets
    for k in elements:
        for i in elements:
            if k in succ[i]:
                succ[i] |= succ[k]
    return frozenset((a, b) for a in elements for b in succ[a])


def _maximal_chains(moments: tuple, order: frozenset) -> list:
    strict = {(a, b) for a, b in order if a != b}
    above = {m: {b for a, b in strict if a == m} for m in moments}
    # Hasse diagram: covers with nothing strictly in between
    hasse = {m: [b for b in moments if b in above[m]
                 and not any(b in above[c] for c in above[m])] for m in moments}
    minimal = [m for m in moments if not any((b, m) in strict for b in moments)]
    chains = []

    def walk(path):
        nxt = hasse[path[-1]]
        if not nxt:
            chains.append(tuple(path))
            return
        for b in nxt:
            walk(path + [b])

    for m in minimal:
        walk([m])
    return chains


@dataclass(frozen=True, eq=False)
class JstitModel:
    """A finite jstit model with relations already closed.

    Use :func:`build_model` or :func:`load_model` rather than constructing
    this directly. ``choice`` maps ``(moment, agent)`` to a tuple of cells
    (frozensets of history ids); missing entries mean the vacuous partition.
    ``act`` maps ``(moment, history)`` to a frozenset of terms.
    """

    moments: tuple
    cover: frozenset
    order: frozenset
    agents: AgentSet
    choice: Mapping
    act: Mapping
    r: frozenset
    re: frozenset
    evidence: frozenset
    valuation: Mapping
    term_universe: frozenset
    formula_universe: frozenset
    normal: bool = True
    cs: ConstantSpec = field(default_factory=ConstantSpec)
    unirelational: bool = False
    declared_terms: frozenset = frozenset()
    declared_formulas: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})

    def __eq__(self, other):
        return isinstance(other, JstitModel) and self.to_document() == other.to_document()

    __hash__ = None

    # structure

    @cached_property
    def moment_index(self) -> dict:
        return {m: i for i, m in enumerate(self.moments)}

    @cached_property
    def histories(self) -> dict:
        """History id -> History, in deterministic order."""
        chains = _maximal_chains(self.moments, self.order)
        idx = self.moment_index
        chains.sort(key=lambda c: (idx[c[-1]], [idx[m] for m in c]))
        out = {}
        for chain in chains:
            hid = chain[-1]
            k = 1
            while hid in out:
                hid = f"{chain[-1]}#{k}"
                k += 1
            out[hid] = History(hid, chain)
        return out

    @cached_property
    def through(self) -> dict:
        """Moment -> tuple of ids of the histories passing through it."""
        out = {m: [] for m in self.moments}
        for h in self.histories.values():
            for m in h.chain:
                out[m].append(h.id)
        return {m: tuple(hs) for m, hs in out.items()}

    @cached_property
    def points(self) -> tuple:
        return tuple(EvalPoint(m, h) for m in self.moments for h in self.through[m])

    @cached_property
    def strictly_above(self) -> dict:
        return {m: frozenset(b for a, b in self.order if a == m and b != m) for m in self.moments}

    @cached_property
    def strictly_below(self) -> dict:
        return {m: frozenset(a for a, b in self.order if b == m and a != m) for m in self.moments}

    @cached_property
    def r_succ(self) -> dict:
        return {m: tuple(b for b in self.moments if (m, b) in self.r) for m in self.moments}

    @cached_property
    def re_succ(self) -> dict:
        return {m: tuple(b for b in self.moments if (m, b) in self.re) for m in self.moments}

    @cached_property
    def evidence_index(self) -> dict:
        out: dict = {}
        for m, t, a in self.evidence:
            out.setdefault((m, t), set()).add(a)
        return out

    @cached_property
    def _cells(self) -> dict:
        out = {}
        for m in self.moments:
            hs = self.through[m]
            for j in self.agents:
                cells = self.choice.get((m, j))
                if cells is None:
                    cells = (frozenset(hs),)
                for h in hs:
                    cell = next((c for c in cells if h in c), frozenset([h]))
                    out[(m, j, h)] = cell
        return out

    def cells(self, m: str, j: str) -> tuple:
        cells = self.choice.get((m, j))
        return (frozenset(self.through[m]),) if cells is None else tuple(cells)

    def cell(self, m: str, j: str, h: str) -> frozenset:
        return self._cells[(m, j, h)]

    def act_at(self, m: str, h: str) -> frozenset:
        return self.act.get((m, h), frozenset())

    def settled(self, m: str) -> frozenset:
        """Terms present at ``m`` under every history through ``m``."""
        hs = self.through[m]
        return frozenset.intersection(*(self.act_at(m, h) for h in hs)) if hs else frozenset()

    def undivided(self, m: str, h: str, g: str) -> bool:
        """True iff ``h`` and ``g`` share a moment strictly after ``m``."""
        ch = set(self.histories[h].chain) & set(self.histories[g].chain)
        return bool(ch & self.strictly_above[m])

    # serialization

    def to_document(self) -> dict:
        def leafs(cells):
            return [sorted(c, key=self._hkey) for c in cells]

        doc = {
            "agents": list(self.agents),
            "moments": list(self.moments),
            "cover": sorted([list(p) for p in self.cover], key=self._pkey),
            "r": sorted([list(p) for p in self.r if p[0] != p[1]], key=self._pkey),
            "re": sorted([list(p) for p in self.re if p[0] != p[1]], key=self._pkey),
            "choice": {},
            "act": {},
            "evidence": sorted(
                [[m, print_term(t), print_formula(a)] for m, t, a in self.evidence],
                key=lambda e: (self.moment_index[e[0]], e[1], e[2])),
            "valuation": {
                a: sorted([list(p) for p in pts], key=self._pkey)
                for a, pts in sorted(self.valuation.items()) if pts
            },
            "universe": {
                "terms": sorted(print_term(t) for t in self.declared_terms),
                "formulas": sorted(print_formula(f) for f in self.declared_formulas),
            },
            "flags": {
                "normal": self.normal,
                "cs": self.cs.policy,
                "unirelational": self.unirelational,
                "normality_range": self.cs.normality_range,
            },
        }
        for m in self.moments:
            for j in self.agents:
                if (m, j) in self.choice:
                    doc["choice"].setdefault(m, {})[j] = leafs(self.choice[(m, j)])
            for h in self.through[m]:
                terms = self.act.get((m, h))
                if terms:
                    doc["act"].setdefault(m, {})[h] = sorted(print_term(t) for t in terms)
        return doc

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_document(), **kw)

    def _hkey(self, h):
        hs = list(self.histories)
        return hs.index(h) if h in hs else len(hs)

    def _pkey(self, p):
        return tuple(self.moment_index.get(x, -1) for x in p)


def histories(model: JstitModel) -> list:
    return list(model.histories.values())


# ---------------------------------------------------------------------------
# Construction


def _term(x) -> ProofTerm:
    return parse_term(x) if isinstance(x, str) else x


def _formula(x, agents=None) -> Formula:
    return parse_formula(x, agents) if isinstance(x, str) else x


def build_model(
    moments: Iterable[str],
    cover: Iterable = (),
    agents: Iterable[str] = ("j",),
    *,
    r: Iterable = (),
    re: Optional[Iterable] = None,
    choice: Optional[Mapping] = None,
    act: Optional[Mapping] = None,
    evidence: Iterable = (),
    valuation: Optional[Mapping] = None,
    universe_terms: Iterable = (),
    universe_formulas: Iterable = (),
    normal: bool = True,
    cs: ConstantSpec | str = "axiomatic",
    normality_range: str = "A0-A9",
    unirelational: bool = False,
    extra_universe: bool = True,
) -> JstitModel:
    """Close relations, derive universes, and check structural invariants.

    ``choice`` maps ``(moment, agent)`` to an iterable of cells of history
    ids; ``act`` maps ``(moment, history)`` to terms; ``valuation`` maps an
    atom name to ``(moment, history)`` pairs. Terms and formulas may be given
    as strings. ``re`` defaults to ``r``.
    """
    moments = tuple(moments)
    if len(set(moments)) != len(moments):
        dupes = sorted({m for m in moments if moments.count(m) > 1})
        raise ModelError(f"duplicate moment ids: {dupes}")
    if not moments:
        raise ModelError("a model needs at least one moment")
    ms = set(moments)
    agents = AgentSet(agents)
    if isinstance(cs, str):
        cs = ConstantSpec.named(cs, normality_range)

    def pairs(name, edges):
        out = []
        for e in edges:
            a, b = tuple(e)
            for x in (a, b):
                if x not in ms:
                    raise ModelError(f"{name}: unknown moment {x!r}")
            out.append((a, b))
        return out

    cover = frozenset(pairs("cover", cover))
    for a, b in cover:
        if a == b:
            raise ModelError(f"cover: edge ({a!r}, {b!r}) is reflexive; cover edges must be strict")
    order = reflexive_transitive_closure(moments, cover)
    for a, b in order:
        if a != b and (b, a) in order:
            raise ModelError(f"cover: cycle through {a!r} and {b!r} (order is not antisymmetric)")
    r_pairs = pairs("r", r)
    if unirelational:
        if re is not None and reflexive_transitive_closure(moments, pairs("re", re)) != \
                reflexive_transitive_closure(moments, r_pairs):
            raise ModelError("re differs from r in a model flagged unirelational")
        re = None
    r_closed = reflexive_transitive_closure(moments, r_pairs)
    re_closed = r_closed if re is None else reflexive_transitive_closure(moments, pairs("re", re))

    # histories are needed to resolve references
    skeleton = JstitModel(
        moments, cover, order, agents, {}, {}, r_closed, re_closed,
        frozenset(), {}, frozenset(), frozenset(), normal, cs, unirelational)
    hist = skeleton.histories
    through = skeleton.through

    def check_point(where, m, h):
        if m not in ms:
            raise ModelError(f"{where}: unknown moment {m!r}")
        if h not in hist:
            raise ModelError(f"{where}: unknown history {h!r}")
        if h not in through[m]:
            raise ModelError(f"{where}: history {h!r} does not pass through {m!r}")

    choice_out = {}
    for (m, j), cells in (choice or {}).items():
        if j not in agents:
            raise ModelError(f"choice: unknown agent {j!r}")
        cells_out = []
        for cell in cells:
            for h in cell:
                check_point(f"choice at {m}/{j}", m, h)
            cells_out.append(frozenset(cell))
        choice_out[(m, j)] = tuple(cells_out)

    act_out = {}
    for (m, h), terms in (act or {}).items():
        check_point("act", m, h)
        ts = frozenset(_term(t) for t in terms)
        if ts:
            act_out[(m, h)] = ts

    ev = set()
    for m, t, a in evidence:
        if m not in ms:
            raise ModelError(f"evidence: unknown moment {m!r}")
        ev.add((m, _term(t), _formula(a, agents)))

    val = {}
    for atom, pts in (valuation or {}).items():
        if not is_atom_name(atom):
            raise ModelError(f"valuation: {atom!r} is not a propositional variable")
        out = set()
        for m, h in pts:
            check_point(f"valuation of {atom}", m, h)
            out.add(EvalPoint(m, h))
        val[atom] = frozenset(out)

    decl_terms = frozenset(_term(t) for t in universe_terms)
    decl_formulas = frozenset(_formula(f, agents) for f in universe_formulas)
    seeds_f = [a for _, _, a in ev] + [Atom(a) for a in val] + list(decl_formulas)
    seeds_t = [t for _, t, _ in ev] + [t for ts in act_out.values() for t in ts] + list(decl_terms)
    fu, tu = closure_universe(seeds_f, seeds_t)

    model = JstitModel(
        moments, cover, order, agents, choice_out, act_out, r_closed, re_closed,
        frozenset(ev), val, tu, fu, normal, cs, unirelational, decl_terms, decl_formulas)
    # share the already computed histories
    model.__dict__["histories"] = hist
    model.__dict__["through"] = through
    return model


def load_model(document, cs: Optional[str] = None, normality_range: Optional[str] = None) -> JstitModel:
    """Build a model from a JSON document (text or already-decoded dict).

    ``cs`` and ``normality_range`` override the document's flags.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ModelError("model document must be a JSON object")
    known = {"agents", "moments", "cover", "r", "re", "choice", "act", "evidence",
             "valuation", "universe", "flags"}
    unknown = set(document) - known
    if unknown:
        raise ModelError(f"unknown keys: {sorted(unknown)}")
    for key in ("agents", "moments"):
        if key not in document:
            raise ModelError(f"missing key {key!r}")
    flags = document.get("flags", {})
    agents = document["agents"]
    try:
        agents = AgentSet(agents)
    except ValueError as exc:
        raise ModelError(f"agents: {exc}") from None

    choice = {}
    for m, per_agent in document.get("choice", {}).items():
        for j, cells in per_agent.items():
            choice[(m, j)] = [list(c) for c in cells]
    act = {}
    for m, per_hist in document.get("act", {}).items():
        for h, terms in per_hist.items():
            act[(m, h)] = terms
    universe = document.get("universe", {})
    try:
        return build_model(
            document["moments"], document.get("cover", []), agents,
            r=document.get("r", []), re=document.get("re"),
            choice=choice, act=act,
            evidence=[tuple(e) for e in document.get("evidence", [])],
            valuation={a: [tuple(p) for p in pts] for a, pts in document.get("valuation", {}).items()},
            universe_terms=universe.get("terms", []),
            universe_formulas=universe.get("formulas", []),
            normal=flags.get("normal", True),
            cs=cs or flags.get("cs", "axiomatic"),
            normality_range=normality_range or flags.get("normality_range", "A0-A9"),
            unirelational=flags.get("unirelational", "re" not in document),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(str(exc)) from None


# ---------------------------------------------------------------------------
# Evidence


def evidence_holds(model: JstitModel, moment: str, t: ProofTerm, a: Formula) -> bool:
    """Membership of ``a`` in E(moment, t): an explicit triple, or a constant
    whose constant-specification entry covers ``t:a`` in a normal model."""
    if a in model.evidence_index.get((moment, t), ()):
        return True
    return model.normal and isinstance(t, Const) and cs_contains(model.cs, Proves(t, a))


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    constraint: str
    witness: tuple

    def __str__(self):
        return f"{self.constraint}: {', '.join(_show(w) for w in self.witness)}"

    def to_json(self) -> dict:
        return {"constraint": self.constraint, "witness": [_show(w) for w in self.witness]}


def _show(x) -> str:
    if isinstance(x, (frozenset, set)):
        return "{" + ", ".join(sorted(_show(y) for y in x)) + "}"
    if isinstance(x, tuple) and not isinstance(x, EvalPoint):
        return "(" + ", ".join(_show(y) for y in x) + ")"
    if isinstance(x, (str, EvalPoint)):
        return str(x)
    try:
        return print_term(x)
    except TypeError:
        return print_formula(x)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def names(self) -> set:
        return {v.constraint for v in self.violations}

    def __str__(self):
        if self.ok:
            return "model valid: all constraints hold"
        lines = [f"model invalid: {len(self.violations)} violation(s)"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"valid": self.ok, "violations": [v.to_json() for v in self.violations]}


def _sorted_terms(ts):
    return sorted(ts, key=print_term)


def _check_frame(m: JstitModel, out: list) -> None:
    order = m.order
    ms = m.moments
    for a, b in itertools.combinations(ms, 2):
        if not any((c, a) in order and (c, b) in order for c in ms):
            out.append(Violation(HISTORICAL_CONNECTION, (a, b)))
    for x in ms:
        below = [y for y in ms if (y, x) in order]
        for a, b in itertools.combinations(below, 2):
            if (a, b) not in order and (b, a) not in order:
                out.append(Violation(NO_BACKWARD_BRANCHING, (x, a, b)))


def _check_choice(m: JstitModel, out: list) -> None:
    for x in m.moments:
        hs = m.through[x]
        for j in m.agents:
            cells = m.cells(x, j)
            seen = set()
            for c in cells:
                if not c:
                    out.append(Violation(CHOICE_PARTITION, (x, j, "empty cell")))
                if seen & c:
                    out.append(Violation(CHOICE_PARTITION, (x, j, "overlapping cells", frozenset(seen & c))))
                seen |= c
            missing = set(hs) - seen
            if missing:
                out.append(Violation(CHOICE_PARTITION, (x, j, "uncovered histories", frozenset(missing))))
            for h, g in itertools.combinations(hs, 2):
                if m.undivided(x, h, g) and m.cell(x, j, h) != m.cell(x, j, g):
                    out.append(Violation(NO_CHOICE_UNDIVIDED, (x, j, h, g)))
        for pick in itertools.product(*(m.cells(x, j) for j in m.agents)):
            if not frozenset.intersection(*pick):
                out.append(Violation(INDEPENDENCE, (x, tuple(pick))))


def _check_relations(m: JstitModel, out: list) -> None:
    for a in m.moments:
        for b in m.moments:
            if (a, b) in m.order and (a, b) not in m.r:
                out.append(Violation(FUTURE_MATTERS, (a, b)))
            if (a, b) in m.r and (a, b) not in m.re:
                out.append(Violation(R_SUBSET_RE, (a, b)))


def _check_act(m: JstitModel, out: list) -> None:
    for x in m.moments:
        hs = m.through[x]
        for lower in m.strictly_below[x]:
            for h in hs:
                for t in _sorted_terms(m.act_at(lower, h) - m.act_at(x, h)):
                    out.append(Violation(EXPANSION, (lower, x, h, t)))
        earlier = set()
        for lower in m.strictly_below[x]:
            for h in hs:
                earlier |= m.act_at(lower, h)
        for t in _sorted_terms(m.settled(x) - earlier):
            out.append(Violation(NO_NEW_PROOFS, (x, t)))
        for h, g in itertools.combinations(hs, 2):
            if m.undivided(x, h, g) and m.act_at(x, h) != m.act_at(x, g):
                out.append(Violation(DIVIDE, (x, h, g)))
    settled = {x: m.settled(x) for x in m.moments}
    for a in m.moments:
        for b in m.re_succ[a]:
            for t in _sorted_terms(settled[a] - settled[b]):
                out.append(Violation(TRANSPARENCY, (a, b, t)))


def _closure_failures(m: JstitModel, holds) -> list:
    """Instances of closure conditions (a)-(c) that fail inside the universes."""
    fails = []
    fu = sorted(m.formula_universe, key=print_formula)
    for u in sorted(m.term_universe, key=print_term):
        for x in m.moments:
            if isinstance(u, App):
                s, t = u.left, u.right
                for b in fu:
                    if holds(x, u, b):
                        continue
                    for a in fu:
                        if holds(x, t, a) and holds(x, s, Implies(a, b)):
                            fails.append(("a", x, s, t, a, b))
                            break
            elif isinstance(u, Sum):
                for a in fu:
                    if (holds(x, u.left, a) or holds(x, u.right, a)) and not holds(x, u, a):
                        fails.append(("b", x, u.left, u.right, a))
            elif isinstance(u, Check):
                t = u.inner
                for a in fu:
                    if Proves(t, a) in m.formula_universe and holds(x, t, a) \
                            and not holds(x, u, Proves(t, a)):
                        fails.append(("c", x, t, a))
    return fails


def _check_evidence(m: JstitModel, out: list) -> None:
    def holds(x, t, a):
        return evidence_holds(m, x, t, a)

    for x, t, a in sorted(m.evidence, key=lambda e: (m.moment_index[e[0]], print_term(e[1]), print_formula(e[2]))):
        for y in m.re_succ[x]:
            if not holds(y, t, a):
                out.append(Violation(EVIDENCE_MONOTONICITY, (x, y, t, a)))
    for fail in _closure_failures(m, holds):
        out.append(Violation(EVIDENCE_CLOSURE, fail))


def validate(model: JstitModel) -> ValidationReport:
    """Run every constraint check and collect all violations."""
    out: list = []
    _check_frame(model, out)
    _check_choice(model, out)
    _check_evidence(model, out)
    _check_act(model, out)
    _check_relations(model, out)
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# Universe extension


def saturate_evidence(model: JstitModel) -> JstitModel:
    """Least extension of the explicit evidence that satisfies the closure
    conditions inside the model's universes.

    Monotonicity along R_e is preserved when it held before, since the
    closure conditions are evaluated moment by moment.
    """
    ev = set(model.evidence)
    index: dict = {}
    for x, t, a in ev:
        index.setdefault((x, t), set()).add(a)

    def holds(x, t, a):
        if a in index.get((x, t), ()):
            return True
        return model.normal and isinstance(t, Const) and cs_contains(model.cs, Proves(t, a))

    while True:
        fails = _closure_failures_fast(model, holds)
        if not fails:
            break
        for x, u, a in fails:
            ev.add((x, u, a))
            index.setdefault((x, u), set()).add(a)
    return _replace_evidence(model, frozenset(ev))


def _closure_failures_fast(model: JstitModel, holds) -> list:
    """Missing ``(moment, term, formula)`` conclusions of the closure conditions."""
    missing = []
    fu = model.formula_universe
    imps = {}
    checked = {}
    for f in fu:
        # candidate premises A for conclusion B, read off A -> B in the universe
        if isinstance(f, Implies):
            imps.setdefault(f.right, []).append(f.left)
        elif isinstance(f, Proves):
            checked.setdefault(f.term, []).append(f)
    for u in model.term_universe:
        for x in model.moments:
            if isinstance(u, App):
                s, t = u.left, u.right
                for b in fu:
                    if holds(x, u, b):
                        continue
                    cands = imps.get(b, []) if not isinstance(s, Const) else fu
                    if any(holds(x, t, a) and holds(x, s, Implies(a, b)) for a in cands):
                        missing.append((x, u, b))
            elif isinstance(u, Sum):
                for a in fu:
                    if (holds(x, u.left, a) or holds(x, u.right, a)) and not holds(x, u, a):
                        missing.append((x, u, a))
            elif isinstance(u, Check):
                t = u.inner
                for c in checked.get(t, ()):
                    if holds(x, t, c.body) and not holds(x, u, c):
                        missing.append((x, u, c))
    return missing


def _replace_evidence(model: JstitModel, evidence: frozenset) -> JstitModel:
    new = JstitModel(
        model.moments, model.cover, model.order, model.agents, model.choice,
        model.act, model.r, model.re, evidence, model.valuation,
        model.term_universe, model.formula_universe, model.normal, model.cs,
        model.unirelational, model.declared_terms, model.declared_formulas)
    for key in ("histories", "through", "points", "moment_index", "strictly_above",
                "strictly_below", "r_succ", "re_succ", "_cells"):
        if key in model.__dict__:
            new.__dict__[key] = model.__dict__[key]
    return new


def with_universe(model: JstitModel, formulas: Iterable[Formula] = (),
                  terms: Iterable[ProofTerm] = (), saturate: bool = True) -> JstitModel:
    """Extend the universes by the closure of ``formulas``/``terms``.

    With ``saturate`` the explicit evidence is closed inside the enlarged
    universes, so that a model which validated before still validates.
    """
    fu, tu = closure_universe(formulas, terms)
    if fu <= model.formula_universe and tu <= model.term_universe:
        return model
    new = JstitModel(
        model.moments, model.cover, model.order, model.agents, model.choice,
        model.act, model.r, model.re, model.evidence, model.valuation,
        model.term_universe | tu, model.formula_universe | fu, model.normal,
        model.cs, model.unirelational, model.declared_terms | tu,
        model.declared_formulas | fu)
    for key in ("histories", "through", "points", "moment_index", "strictly_above",
                "strictly_below", "r_succ", "re_succ", "_cells"):
        if key in model.__dict__:
            new.__dict__[key] = model.__dict__[key]
    return saturate_evidence(new) if saturate else new
