"""Bounded generation of validator-clean normal models, and witness search.

Exhaustive enumeration walks, for every moment count up to the bound,
rooted trees (frames of finite models are exactly these: historical
connection gives a root and no backward branching a unique parent), then
choice, Act, R, R_e, evidence and valuation in that nesting order. Each
layer only generates values compatible with the constraints that concern
it, so every yielded model validates; the tests check that against a
generate-and-filter oracle.

Act is built top-down. Along a finite tree the constraints on presented
proofs force ``settled(m) == Act(parent(m), h)`` for any ``h`` through
``m`` (empty at the root), while each child of a moment receives its own
superset of ``settled(m)``, and those supersets must intersect to exactly
``settled(m)``.
"""

from __future__ import annotations

import itertools
import logging
import multiprocessing
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional

from .model import (
    EvalPoint, History, JstitModel, evidence_holds, reflexive_transitive_closure,
    load_model, saturate_evidence, validate, _closure_failures,
)
from .proofs import ConstantSpec, cs_contains
from .semantics import extension
from .syntax import (
    AgentSet, Atom, Const, Formula, Not, Proves, Var, atoms_of,
    closure_universe, parse_formula, parse_term, print_formula, subformulas,
    terms_of,
)

__all__ = [
    "SearchBounds", "SearchExhausted", "SearchStats", "enumerate_models",
    "find_model", "find_countermodel", "random_model", "random_models",
    "rooted_trees", "set_partitions",
]

log = logging.getLogger(__name__)


class SearchExhausted(RuntimeError):
    """The random generator spent its attempt budget without a valid model."""


@dataclass(frozen=True)
class SearchBounds:
    """Bounds for model search.

    ``evidence_formulas`` lists formulas (besides the atoms) that explicit
    evidence may mention. ``relations`` is ``"all"`` to range R_e over every
    preorder containing R, or ``"uni"`` to fix R_e = R.
    """

    max_moments: int
    agents: tuple = ("j",)
    term_universe: frozenset = frozenset()
    atom_universe: frozenset = frozenset()
    mode: str = "exhaustive"
    sample_count: int = 0
    seed: Optional[int] = None
    evidence_formulas: frozenset = frozenset()
    relations: str = "all"
    cs: str = "axiomatic"
    min_moments: int = 1

    def __post_init__(self):
        if self.max_moments < 1:
            raise ValueError("max_moments must be at least 1")
        if self.mode not in ("exhaustive", "randomized"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "randomized" and self.seed is None:
            raise ValueError("randomized mode needs a seed")
        if self.relations not in ("all", "uni"):
            raise ValueError(f"unknown relations setting {self.relations!r}")
        object.__setattr__(self, "agents", AgentSet(self.agents))
        object.__setattr__(self, "term_universe", frozenset(
            parse_term(t) if isinstance(t, str) else t for t in self.term_universe))
        object.__setattr__(self, "atom_universe", frozenset(
            a.name if isinstance(a, Atom) else a for a in self.atom_universe))
        object.__setattr__(self, "evidence_formulas", frozenset(
            parse_formula(f) if isinstance(f, str) else f for f in self.evidence_formulas))

    def extended_for(self, f: Formula) -> "SearchBounds":
        """Bounds whose universes also cover the terms, atoms and evidence
        bodies occurring in ``f``."""
        proves_bodies = {g.body for g in subformulas(f) if isinstance(g, Proves)}
        return SearchBounds(
            self.max_moments, self.agents,
            self.term_universe | {t for t in terms_of(f)},
            self.atom_universe | {a.name for a in atoms_of(f)},
            self.mode, self.sample_count, self.seed,
            self.evidence_formulas | {b for b in proves_bodies if not isinstance(b, Atom)},
            self.relations, self.cs, self.min_moments,
        )

    @property
    def constant_spec(self) -> ConstantSpec:
        return ConstantSpec.named(self.cs)

    def universes(self) -> tuple:
        atoms = [Atom(a) for a in sorted(self.atom_universe)]
        fu, tu = closure_universe(atoms + sorted(self.evidence_formulas, key=print_formula),
                                  self.term_universe)
        return fu, tu


@dataclass
class SearchStats:
    trees: int = 0
    models: int = 0
    checked: int = 0

    def __str__(self):
        return f"trees={self.trees} models={self.models} checked={self.checked}"


# ---------------------------------------------------------------------------
# Combinatorial building blocks


@lru_cache(maxsize=None)
def rooted_trees(n: int) -> tuple:
    """Unlabeled rooted trees on ``n`` nodes, as canonical nested tuples,
    sorted by their shape code."""
    if n == 1:
        return ((),)
    seen = set()
    for smaller in rooted_trees(n - 1):
        for grown in _grow(smaller):
            seen.add(grown)
    return tuple(sorted(seen, key=_code))


def _canon(children) -> tuple:
    return tuple(sorted(children, key=_code))


def _grow(tree: tuple) -> Iterator[tuple]:
    yield _canon(tree + ((),))
    for i, child in enumerate(tree):
        for g in _grow(child):
            yield _canon(tree[:i] + (g,) + tree[i + 1:])


def _code(tree: tuple) -> str:
    return "(" + "".join(_code(c) for c in tree) + ")"


def set_partitions(items: tuple) -> list:
    """All partitions of ``items`` in restricted-growth order."""
    items = tuple(items)
    if not items:
        return [()]
    out = []

    def rec(i, blocks):
        if i == len(items):
            out.append(tuple(tuple(b) for b in blocks))
            return
        for b in blocks:
            b.append(items[i])
            rec(i + 1, blocks)
            b.pop()
        blocks.append([items[i]])
        rec(i + 1, blocks)
        blocks.pop()

    rec(0, [])
    return out


class _Frame:
    """A labeled tree with everything the layers above need."""

    def __init__(self, shape: tuple):
        self.shape = shape
        self.code = _code(shape)
        names = []
        parent = {}
        children = {}
        queue = [(shape, None)]
        while queue:
            node, par = queue.pop(0)
            name = f"m{len(names)}"
            names.append(name)
            children[name] = []
            if par is not None:
                parent[name] = par
                children[par].append(name)
            for c in node:
                queue.append((c, name))
        self.moments = tuple(names)
        self.parent = parent
        self.children = {m: tuple(cs) for m, cs in children.items()}
        self.cover = frozenset((p, c) for c, p in parent.items())
        self.order = reflexive_transitive_closure(self.moments, self.cover)
        self.leaves = tuple(m for m in self.moments if not self.children[m])
        self.leaves_below = {m: tuple(l for l in self.leaves if (m, l) in self.order)
                             for m in self.moments}
        self.points = tuple(EvalPoint(m, h) for m in self.moments for h in self.leaves_below[m])
        self._preorders = None

    def preorders(self) -> list:
        """All preorders on the moments that contain the tree order."""
        if self._preorders is None:
            extra = [(a, b) for a in self.moments for b in self.moments
                     if a != b and (a, b) not in self.order]
            found = []
            for mask in range(1 << len(extra)):
                rel = set(self.order)
                rel.update(extra[i] for i in range(len(extra)) if mask >> i & 1)
                if _transitive(rel):
                    found.append(frozenset(rel))
            self._preorders = found
        return self._preorders


def _transitive(rel: set) -> bool:
    succ: dict = {}
    for a, b in rel:
        succ.setdefault(a, set()).add(b)
    return all(succ.get(b, set()) <= succ[a] for a in succ for b in succ[a])


def _up_sets(moments: tuple, rel: frozenset) -> list:
    """Subsets of ``moments`` closed upward along ``rel``, in mask order."""
    out = []
    for mask in range(1 << len(moments)):
        s = {moments[i] for i in range(len(moments)) if mask >> i & 1}
        if all(b in s for a, b in rel if a in s):
            out.append(frozenset(s))
    return out


# ---------------------------------------------------------------------------
# Layers


def _choices(frame: _Frame, agents: tuple) -> Iterator[dict]:
    per_moment = []
    for m in frame.moments:
        kids = frame.children[m]
        if len(kids) < 2:
            per_moment.append([None])
            continue
        parts = set_partitions(kids)
        options = []
        for combo in itertools.product(parts, repeat=len(agents)):
            if all(set.intersection(*(set(c) for c in pick))
                   for pick in itertools.product(*combo)):
                options.append(combo)
        per_moment.append(options)
    for combo in itertools.product(*per_moment):
        choice = {}
        for m, opt in zip(frame.moments, combo):
            if opt is None:
                continue
            for j, part in zip(agents, opt):
                if len(part) == 1:
                    continue  # vacuous partition, left implicit
                choice[(m, j)] = tuple(
                    frozenset(l for c in cell for l in frame.leaves_below[c]) for cell in part)
        yield choice


def _child_extras(kids: int, free: tuple) -> list:
    """Ways to give each of ``kids`` children extra terms from ``free`` so
    that no term reaches every child."""
    if kids == 1:
        return [(frozenset(),)]
    per_term = [[s for s in itertools.product((0, 1), repeat=kids) if not all(s)] for _ in free]
    out = []
    for pattern in itertools.product(*per_term):
        out.append(tuple(frozenset(t for t, bits in zip(free, pattern) if bits[i])
                         for i in range(kids)))
    return out


def _acts(frame: _Frame, terms: tuple) -> Iterator[tuple]:
    """Yield ``(act, settled)`` pairs."""
    inner = [m for m in frame.moments if frame.children[m]]

    def rec(k, settled, grant):
        if k == len(inner):
            act = {}
            for m in frame.moments:
                for h in frame.leaves_below[m]:
                    if m == h:
                        val = settled[m]
                    else:
                        child = next(c for c in frame.children[m] if h in frame.leaves_below[c])
                        val = grant[(m, child)]
                    if val:
                        act[(m, h)] = val
            yield act, dict(settled)
            return
        m = inner[k]
        s = settled[m]
        free = tuple(t for t in terms if t not in s)
        kids = frame.children[m]
        for extras in _child_extras(len(kids), free):
            for c, x in zip(kids, extras):
                settled[c] = s | x
                grant[(m, c)] = s | x
            yield from rec(k + 1, settled, grant)

    yield from rec(0, {frame.moments[0]: frozenset()}, {})


def _transparent(settled: dict, rel: frozenset) -> bool:
    return all(settled[a] <= settled[b] for a, b in rel)


class _EvidenceSpace:
    """Explicit evidence facts for one frame and universe."""

    def __init__(self, frame: _Frame, bounds: SearchBounds, cs: ConstantSpec):
        self.frame = frame
        fu, tu = bounds.universes()
        self.fu, self.tu = fu, tu
        formulas = sorted(
            [Atom(a) for a in sorted(bounds.atom_universe)] + sorted(bounds.evidence_formulas, key=print_formula),
            key=print_formula)
        formulas = list(dict.fromkeys(formulas))
        facts = []
        for t in sorted(tu, key=str):
            for a in formulas:
                if isinstance(t, Const) and cs_contains(cs, Proves(t, a)):
                    continue  # supplied by the constant specification
                facts.append((t, a))
        self.facts = facts
        self.needs_closure = any(not isinstance(t, Var) for t in tu)
        self._cache = {}

    def assignments(self, re: frozenset) -> list:
        key = re
        if key not in self._cache:
            ups = _up_sets(self.frame.moments, re)
            self._cache[key] = ups
        ups = self._cache[key]
        for combo in itertools.product(ups, repeat=len(self.facts)):
            yield frozenset((m, t, a) for (t, a), moments in zip(self.facts, combo) for m in moments)


def _valuations(frame: _Frame, atoms: tuple) -> Iterator[dict]:
    subsets = [frozenset(itertools.compress(frame.points, bits))
               for bits in itertools.product((0, 1), repeat=len(frame.points))]
    for combo in itertools.product(subsets, repeat=len(atoms)):
        yield {a: s for a, s in zip(atoms, combo) if s}


def _succ(moments, rel):
    return {m: tuple(b for b in moments if (m, b) in rel) for m in moments}


def _assemble(frame, agents, choice, act, r, re, evidence, valuation, fu, tu, cs, unirelational,
              shared) -> JstitModel:
    model = JstitModel(
        frame.moments, frame.cover, frame.order, agents, choice, act, r, re,
        evidence, valuation, tu, fu, True, cs, unirelational, tu, fu)
    d = model.__dict__
    d.update(shared)
    d["r_succ"] = _succ(frame.moments, r)
    d["re_succ"] = d["r_succ"] if re is r else _succ(frame.moments, re)
    return model


def _shared(frame: _Frame) -> dict:
    hist = {}
    for leaf in frame.leaves:
        chain = tuple(m for m in frame.moments if (m, leaf) in frame.order)
        hist[leaf] = History(leaf, chain)
    return {
        "histories": hist,
        "through": dict(frame.leaves_below),
        "points": frame.points,
        "moment_index": {m: i for i, m in enumerate(frame.moments)},
        "strictly_above": {m: frozenset(b for a, b in frame.order if a == m and b != m) for m in frame.moments},
        "strictly_below": {m: frozenset(a for a, b in frame.order if b == m and a != m) for m in frame.moments},
    }


# ---------------------------------------------------------------------------
# Enumeration


def frames(bounds: SearchBounds) -> Iterator[_Frame]:
    for n in range(bounds.min_moments, bounds.max_moments + 1):
        for shape in rooted_trees(n):
            yield _Frame(shape)


def enumerate_models(bounds: SearchBounds, stats: Optional[SearchStats] = None,
                     shard: Optional[tuple] = None) -> Iterator[JstitModel]:
    """Every validator-clean normal model within ``bounds``, canonically
    labeled, in the documented order.

    ``shard=(k, n)`` restricts the stream to frames whose position modulo
    ``n`` is ``k``; the union over ``k`` is the full stream.
    """
    for _, model in _enumerate_indexed(bounds, stats, shard):
        yield model


def _enumerate_indexed(bounds, stats=None, shard=None):
    if bounds.mode != "exhaustive":
        raise ValueError("enumerate_models needs exhaustive bounds")
    stats = stats if stats is not None else SearchStats()
    cs = bounds.constant_spec
    agents = bounds.agents
    fu, tu = bounds.universes()
    terms = tuple(sorted(tu, key=str))
    atoms = tuple(sorted(bounds.atom_universe))
    uni = bounds.relations == "uni"
    for pos, frame in enumerate(frames(bounds)):
        if shard is not None and pos % shard[1] != shard[0]:
            continue
        stats.trees += 1
        log.debug("frame %s", frame.code)
        shared = _shared(frame)
        evidence_space = _EvidenceSpace(frame, bounds, cs)
        preorders = frame.preorders()
        for choice in _choices(frame, agents):
            for act, settled in _acts(frame, terms):
                for r in preorders:
                    if not _transparent(settled, r):
                        continue
                    re_options = [r] if uni else [q for q in preorders if r <= q]
                    for re in re_options:
                        if re is not r and not _transparent(settled, re):
                            continue
                        for ev in evidence_space.assignments(re):
                            if evidence_space.needs_closure:
                                probe = _assemble(frame, agents, choice, act, r, re, ev, {}, fu, tu,
                                                  cs, uni, shared)
                                if _closure_failures(probe, lambda x, t, a: evidence_holds(probe, x, t, a)):
                                    continue
                            for val in _valuations(frame, atoms):
                                stats.models += 1
                                yield pos, _assemble(frame, agents, choice, act, r, re, ev, val, fu, tu,
                                                cs, uni or re is r, shared)


def _first_point(model: JstitModel, f: Formula) -> Optional[EvalPoint]:
    ext = extension(model, f)
    if not ext:
        return None
    return next(p for p in model.points if p in ext)


_BEST = None


def _share_best(best) -> None:
    global _BEST
    _BEST = best


def _shard_witness(f: Formula, bounds: SearchBounds, shard: tuple):
    for pos, model in _enumerate_indexed(bounds, None, shard):
        if pos > _BEST.value:
            return None
        p = _first_point(model, f)
        if p is not None:
            with _BEST.get_lock():
                _BEST.value = min(_BEST.value, pos)
            return pos, model.to_document(), tuple(p)
    return None


def _find_sharded(f: Formula, bounds: SearchBounds, jobs: int) -> Optional[tuple]:
    # Each shard owns whole frames, so the smallest frame position among the
    # shard witnesses is the witness of the sequential search. Once some
    # shard has a witness, later frames cannot matter and the others stop.
    best = multiprocessing.Value("q", 2**62)
    with ProcessPoolExecutor(max_workers=jobs, initializer=_share_best, initargs=(best,)) as pool:
        found = [r for r in pool.map(_shard_witness, [f] * jobs, [bounds] * jobs,
                                     [(k, jobs) for k in range(jobs)]) if r is not None]
    if not found:
        return None
    _, doc, point = min(found, key=lambda r: r[0])
    return load_model(doc), EvalPoint(*point)


def find_model(f: Formula, bounds: SearchBounds,
               stats: Optional[SearchStats] = None, jobs: int = 1) -> Optional[tuple]:
    """First ``(model, point)`` in the bounded space where ``f`` holds.

    ``jobs > 1`` splits exhaustive search over worker processes; the result
    is the same as with one job.
    """
    if isinstance(f, str):
        f = parse_formula(f)
    bounds = bounds.extended_for(f)
    if jobs > 1 and bounds.mode == "exhaustive":
        return _find_sharded(f, bounds, jobs)
    stats = stats if stats is not None else SearchStats()
    models = enumerate_models(bounds, stats) if bounds.mode == "exhaustive" else random_models(bounds)
    for model in models:
        stats.checked += 1
        p = _first_point(model, f)
        if p is not None:
            log.info("witness after %s", stats)
            return model, p
    log.info("no witness; %s", stats)
    return None


def find_countermodel(f: Formula, bounds: SearchBounds,
                      stats: Optional[SearchStats] = None, jobs: int = 1) -> Optional[tuple]:
    """First ``(model, point)`` where ``f`` fails."""
    if isinstance(f, str):
        f = parse_formula(f)
    return find_model(Not(f), bounds, stats, jobs)


# ---------------------------------------------------------------------------
# Random generation


def _random_frame(rng: random.Random, n: int) -> _Frame:
    parent = [None] + [rng.randrange(i) for i in range(1, n)]
    kids = {i: [] for i in range(n)}
    for i in range(1, n):
        kids[parent[i]].append(i)

    def shape(i):
        return _canon(tuple(shape(c) for c in kids[i]))

    return _Frame(shape(0))


def _random_partition(rng: random.Random, items: tuple) -> tuple:
    k = rng.randint(1, len(items))
    blocks = [[] for _ in range(k)]
    for it in items:
        blocks[rng.randrange(k)].append(it)
    return tuple(tuple(b) for b in blocks if b)


def _random_preorder(rng, moments, base, density) -> frozenset:
    extra = [(a, b) for a in moments for b in moments if a != b and (a, b) not in base]
    chosen = [p for p in extra if rng.random() < density]
    return reflexive_transitive_closure(moments, set(base) | set(chosen))


def random_model(bounds: SearchBounds, rng: Optional[random.Random] = None,
                 attempts: int = 1000) -> JstitModel:
    """One random validator-clean normal model; deterministic per seed."""
    if bounds.seed is None and rng is None:
        raise ValueError("random_model needs a seed")
    rng = rng if rng is not None else random.Random(bounds.seed)
    cs = bounds.constant_spec
    fu, tu = bounds.universes()
    terms = tuple(sorted(tu, key=str))
    atoms = tuple(sorted(bounds.atom_universe))
    agents = bounds.agents
    for _ in range(attempts):
        n = rng.randint(bounds.min_moments, bounds.max_moments)
        frame = _random_frame(rng, n)

        choice = {}
        for m in frame.moments:
            kids = frame.children[m]
            if len(kids) < 2:
                continue
            for j in agents:
                part = _random_partition(rng, kids)
                if len(part) > 1:
                    choice[(m, j)] = part
        # independence: coarsen until every selection of cells intersects
        for m in frame.moments:
            parts = [choice.get((m, j), (frame.children[m],)) for j in agents]
            if frame.children[m] and not all(set.intersection(*(set(c) for c in pick))
                                             for pick in itertools.product(*parts)):
                for j in agents[1:]:
                    choice.pop((m, j), None)
        choice = {key: tuple(frozenset(l for c in cell for l in frame.leaves_below[c]) for cell in part)
                  for key, part in choice.items()}

        settled = {frame.moments[0]: frozenset()}
        act = {}
        for m in frame.moments:
            kids = frame.children[m]
            if not kids:
                if settled[m]:
                    act[(m, m)] = settled[m]
                continue
            free = [t for t in terms if t not in settled[m]]
            extras = [set() for _ in kids]
            if len(kids) > 1:
                for t in free:
                    if rng.random() < 0.5:
                        bits = [rng.random() < 0.5 for _ in kids]
                        if all(bits):
                            bits[rng.randrange(len(kids))] = False
                        for i, b in enumerate(bits):
                            if b:
                                extras[i].add(t)
            for c, x in zip(kids, extras):
                settled[c] = settled[m] | x
                for h in frame.leaves_below[c]:
                    if settled[c]:
                        act[(m, h)] = settled[c]

        r = _random_preorder(rng, frame.moments, frame.order, rng.choice((0.0, 0.15, 0.4)))
        if not _transparent(settled, r):
            r = frame.order
        uni = bounds.relations == "uni" or rng.random() < 0.5
        if uni:
            re = r
        else:
            re = _random_preorder(rng, frame.moments, r, rng.choice((0.15, 0.4)))
            if not _transparent(settled, re):
                re = r
                uni = True

        evidence = set()
        formulas = [Atom(a) for a in atoms] + sorted(bounds.evidence_formulas, key=print_formula)
        for t in terms:
            for a in formulas:
                if rng.random() < 0.5:
                    seeds = [m for m in frame.moments if rng.random() < 0.4]
                    up = {b for m in seeds for b in frame.moments if (m, b) in re}
                    evidence.update((m, t, a) for m in up)

        valuation = {}
        for a in atoms:
            valuation[a] = frozenset(p for p in frame.points if rng.random() < 0.5)

        shared = _shared(frame)
        model = _assemble(frame, agents, choice, act, r, r if uni else re, frozenset(evidence),
                          valuation, fu, tu, cs, uni, shared)
        model = saturate_evidence(model)
        if validate(model).ok:
            return model
    raise SearchExhausted(f"no valid model after {attempts} attempts")


def random_models(bounds: SearchBounds) -> Iterator[JstitModel]:
    """``bounds.sample_count`` random models from one seeded stream."""
    rng = random.Random(bounds.seed)
    for _ in range(bounds.sample_count):
        yield random_model(bounds, rng)
