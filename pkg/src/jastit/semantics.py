"""Satisfaction over finite jstit models.

Formulas are evaluated by computing their extension, the set of
moment-history pairs where they hold, bottom-up. Extensions are memoized
per model, which keeps repeated queries over enumerated models cheap.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

from .model import EvalPoint, JstitModel, evidence_holds
from .syntax import (
    And, Atom, Box, Diamond, E, Falsum, Formula, Implies, K, Not, Or, Prove,
    Proven, Proves, Stit, agents_of,
)

__all__ = [
    "SemanticsError", "satisfies", "extension", "valid_in_model", "Validity",
    "expand_defined", "proves_simplified", "proves_literal",
]


class SemanticsError(ValueError):
    pass


def _check_point(model: JstitModel, at) -> EvalPoint:
    at = EvalPoint(*at)
    if at.moment not in model.moment_index:
        raise SemanticsError(f"unknown moment {at.moment!r}")
    if at.history not in model.through[at.moment]:
        raise SemanticsError(f"history {at.history!r} does not pass through {at.moment!r}")
    return at


def _check_agents(model: JstitModel, f: Formula) -> None:
    missing = agents_of(f) - set(model.agents)
    if missing:
        raise SemanticsError(f"formula mentions agents not in the model: {sorted(missing)}")


def satisfies(model: JstitModel, at, f: Formula) -> bool:
    """``model, at.moment, at.history |= f``."""
    at = _check_point(model, at)
    _check_agents(model, f)
    return at in _ext(model, f)


def extension(model: JstitModel, f: Formula) -> frozenset:
    """All points of ``model`` where ``f`` holds."""
    _check_agents(model, f)
    return _ext(model, f)


class Validity(NamedTuple):
    valid: bool
    counterexample: Optional[EvalPoint] = None

    def __bool__(self):
        return self.valid


def valid_in_model(model: JstitModel, f: Formula) -> Validity:
    """Truth at every point; otherwise the first failing point in
    (declared moment order, history order)."""
    ext = extension(model, f)
    for p in model.points:
        if p not in ext:
            return Validity(False, p)
    return Validity(True)


def expand_defined(f: Formula) -> Formula:
    """Replace ``Prove``/``Proven`` by their definitions, recursively."""
    if isinstance(f, Prove):
        body = expand_defined(f.body)
        return And(And(Stit(f.agent, E(f.term)), Diamond(Not(E(f.term)))), Proves(f.term, body))
    if isinstance(f, Proven):
        return And(Box(E(f.term)), Proves(f.term, expand_defined(f.body)))
    if isinstance(f, (Atom, Falsum, E)):
        return f
    if isinstance(f, (And, Or, Implies)):
        return type(f)(expand_defined(f.left), expand_defined(f.right))
    if isinstance(f, Stit):
        return Stit(f.agent, expand_defined(f.body))
    if isinstance(f, Proves):
        return Proves(f.term, expand_defined(f.body))
    return type(f)(expand_defined(f.body))


def proves_literal(model: JstitModel, at, t, a: Formula) -> bool:
    """``t:a`` by the two-relation clause: evidence at the moment, and ``a``
    at every point of every R_e-successor."""
    return at in _ext(model, Proves(t, a))


def proves_simplified(model: JstitModel, at, t, a: Formula) -> bool:
    """``t:a`` by the single-relation clause: evidence and ``K a``."""
    return evidence_holds(model, at[0], t, a) and at in _ext(model, K(a))


# ---------------------------------------------------------------------------


def _at_moments(model: JstitModel, good) -> frozenset:
    return frozenset(p for p in model.points if p.moment in good)


def _ext(model: JstitModel, f: Formula) -> frozenset:
    cache = model._cache
    hit = cache.get(f)
    if hit is not None:
        return hit
    val = _compute(model, f)
    cache[f] = val
    return val


def _all_at(model: JstitModel, ext: frozenset, m: str) -> bool:
    return all(EvalPoint(m, h) in ext for h in model.through[m])


def _compute(model: JstitModel, f: Formula) -> frozenset:
    points = model.points
    if isinstance(f, Atom):
        return model.valuation.get(f.name, frozenset()) & frozenset(points)
    if isinstance(f, Falsum):
        return frozenset()
    if isinstance(f, Not):
        body = _ext(model, f.body)
        return frozenset(p for p in points if p not in body)
    if isinstance(f, And):
        return _ext(model, f.left) & _ext(model, f.right)
    if isinstance(f, Or):
        return _ext(model, f.left) | _ext(model, f.right)
    if isinstance(f, Implies):
        left, right = _ext(model, f.left), _ext(model, f.right)
        return frozenset(p for p in points if p not in left or p in right)
    if isinstance(f, Box):
        body = _ext(model, f.body)
        return _at_moments(model, {m for m in model.moments if _all_at(model, body, m)})
    if isinstance(f, Diamond):
        body = _ext(model, f.body)
        return _at_moments(model, {p.moment for p in body})
    if isinstance(f, Stit):
        body = _ext(model, f.body)
        return frozenset(
            p for p in points
            if all(EvalPoint(p.moment, g) in body for g in model.cell(p.moment, f.agent, p.history)))
    if isinstance(f, K):
        body = _ext(model, f.body)
        full = {m for m in model.moments if _all_at(model, body, m)}
        return _at_moments(model, {m for m in model.moments
                                   if all(n in full for n in model.r_succ[m])})
    if isinstance(f, Proves):
        body = _ext(model, f.body)
        full = {m for m in model.moments if _all_at(model, body, m)}
        return _at_moments(model, {
            m for m in model.moments
            if evidence_holds(model, m, f.term, f.body) and all(n in full for n in model.re_succ[m])})
    if isinstance(f, E):
        return frozenset(p for p in points if f.term in model.act_at(*p))
    if isinstance(f, Prove):
        t = f.term
        proves = _ext(model, Proves(t, f.body))
        return frozenset(
            p for p in points
            if all(t in model.act_at(p.moment, g) for g in model.cell(p.moment, f.agent, p.history))
            and p in proves
            and any(t not in model.act_at(p.moment, g) for g in model.through[p.moment]))
    if isinstance(f, Proven):
        t = f.term
        proves = _ext(model, Proves(t, f.body))
        return frozenset(
            p for p in points
            if all(t in model.act_at(p.moment, g) for g in model.through[p.moment]) and p in proves)
    raise TypeError(f"not a formula: {f!r}")
