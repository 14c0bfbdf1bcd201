"""Proof polynomials, formulas, the concrete grammar and the printer.

Concrete grammar, loosest to tightest::

    formula := iff
    iff     := imp ('<->' imp)?
    imp     := or ('->' imp)?                  right-associative
    or      := and ('|' and)*                  left-associative
    and     := prefix ('&' prefix)*            left-associative
    prefix  := '~' prefix | 'K' prefix | '[]' prefix | '<>' prefix
             | '[' agent ']' prefix | term ':' prefix | 'E' term | primary
    primary := atom | 'false' | 'Prove' '(' agent ',' term ',' formula ')'
             | 'Proven' '(' term ',' formula ')' | '(' formula ')'

    term    := product ('+' product)*          left-associative
    product := unary ('*' unary)*              left-associative
    unary   := '!' unary | var | const | '(' term ')'

``<->`` is not an AST node; ``A <-> B`` parses to ``(A -> B) & (B -> A)``.
The usual Unicode glyphs (``¬ ∧ ∨ → ↔ □ ◇ ⊥ ×``) are accepted as aliases.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Union

__all__ = [
    "ParseError",
    "Var", "Const", "Sum", "App", "Check", "ProofTerm",
    "Atom", "Not", "And", "Or", "Implies", "Falsum", "FALSE", "Stit", "Box",
    "Diamond", "K", "Proves", "E", "Prove", "Proven", "Formula",
    "AgentSet", "parse_formula", "parse_term", "print_formula", "print_term",
    "closure_universe", "subformulas", "subterms", "terms_of", "atoms_of",
    "agents_of", "is_var_name", "is_const_name", "is_atom_name",
]

VAR_RE = re.compile(r"[xyzwu]\d*\Z")
CONST_RE = re.compile(r"[abcd]\d*\Z")
ATOM_RE = re.compile(r"[pqrs]\d*\Z")


def is_var_name(name: str) -> bool:
    return bool(VAR_RE.match(name))


def is_const_name(name: str) -> bool:
    return bool(CONST_RE.match(name))


def is_atom_name(name: str) -> bool:
    return bool(ATOM_RE.match(name))


class ParseError(ValueError):
    """Raised on malformed input; ``position`` is a 0-based character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.message = message
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")

    def annotated(self) -> str:
        if not self.text:
            return str(self)
        return f"{self}\n  {self.text}\n  {' ' * self.position}^"


# ---------------------------------------------------------------------------
# Proof polynomials


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not is_var_name(self.name):
            raise ValueError(f"not a proof variable name: {self.name!r}")

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class Const:
    name: str

    def __post_init__(self):
        if not is_const_name(self.name):
            raise ValueError(f"not a proof constant name: {self.name!r}")

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class Sum:
    left: "ProofTerm"
    right: "ProofTerm"

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class App:
    left: "ProofTerm"
    right: "ProofTerm"

    def __str__(self):
        return print_term(self)


@dataclass(frozen=True)
class Check:
    inner: "ProofTerm"

    def __str__(self):
        return print_term(self)


ProofTerm = Union[Var, Const, Sum, App, Check]
_TERM_TYPES = (Var, Const, Sum, App, Check)


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Atom:
    name: str

    def __post_init__(self):
        if not is_atom_name(self.name):
            raise ValueError(f"not a propositional variable name: {self.name!r}")

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Falsum:
    def __str__(self):
        return "false"


FALSE = Falsum()


@dataclass(frozen=True)
class Stit:
    agent: str
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Box:
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Diamond:
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class K:
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Proves:
    term: ProofTerm
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class E:
    term: ProofTerm

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Prove:
    agent: str
    term: ProofTerm
    body: "Formula"

    def __str__(self):
        return print_formula(self)


@dataclass(frozen=True)
class Proven:
    term: ProofTerm
    body: "Formula"

    def __str__(self):
        return print_formula(self)


Formula = Union[Atom, Not, And, Or, Implies, Falsum, Stit, Box, Diamond, K,
                Proves, E, Prove, Proven]


def _memo_hash(cls):
    # Nodes are immutable and used heavily as dict keys; hashing a deep tree
    # on every lookup dominates evaluation time otherwise.
    names = tuple(f.name for f in fields(cls))

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((cls.__name__,) + tuple(getattr(self, n) for n in names))
            object.__setattr__(self, "_hash", h)
        return h

    def __getstate__(self):
        # string hashes differ between processes, so never ship a cached one
        return {n: getattr(self, n) for n in names}

    cls.__hash__ = __hash__
    cls.__getstate__ = __getstate__


for _cls in (Var, Const, Sum, App, Check, Atom, Not, And, Or, Implies, Falsum, Stit, Box,
             Diamond, K, Proves, E, Prove, Proven):
    _memo_hash(_cls)


class AgentSet(tuple):
    """Ordered, duplicate-free, non-empty tuple of agent names."""

    def __new__(cls, agents: Iterable[str]):
        agents = tuple(agents)
        if not agents:
            raise ValueError("agent set must be non-empty")
        if len(set(agents)) != len(agents):
            raise ValueError(f"duplicate agents in {list(agents)}")
        for a in agents:
            if not isinstance(a, str) or not _AGENT_RE.match(a):
                raise ValueError(f"bad agent identifier: {a!r}")
        return super().__new__(cls, agents)


_AGENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


# ---------------------------------------------------------------------------
# Lexer

_GLYPHS = {
    "¬": "~", "∧": "&", "∨": "|", "→": "->", "↔": "<->", "□": "[]",
    "◇": "<>", "⊥": "false", "×": "*",
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<op><->|->|<>|\[\]|[|&~\[\]():,+*!])
  | (?P<glyph>[¬∧∨→↔□◇⊥×])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

_KEYWORDS = {"K", "E", "false", "Prove", "Proven"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'op', 'ident', 'kw', 'eof'
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        s = m.group()
        if kind == "glyph":
            s = _GLYPHS[s]
            kind = "kw" if s == "false" else "op"
        elif kind == "ident" and s in _KEYWORDS:
            kind = "kw"
        if kind != "ws":
            toks.append(_Tok(kind, s, pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str, agents: Optional[Iterable[str]] = None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.agents = None if agents is None else set(agents)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.pos, self.text)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw") and self.tok.text == text

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def finish(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # terms

    def term(self) -> ProofTerm:
        t = self.product()
        while self.at("+"):
            self.i += 1
            t = Sum(t, self.product())
        return t

    def product(self) -> ProofTerm:
        t = self.unary()
        while self.at("*"):
            self.i += 1
            t = App(t, self.unary())
        return t

    def unary(self) -> ProofTerm:
        tok = self.tok
        if self.at("!"):
            self.i += 1
            return Check(self.unary())
        if self.at("("):
            self.i += 1
            t = self.term()
            self.expect(")")
            return t
        if tok.kind == "ident":
            if is_var_name(tok.text):
                self.i += 1
                return Var(tok.text)
            if is_const_name(tok.text):
                self.i += 1
                return Const(tok.text)
            raise self.error(f"{tok.text!r} is not a proof variable or constant")
        raise self.error(f"term expected, found {tok.text or 'end of input'!r}")

    def starts_term(self) -> bool:
        tok = self.tok
        if tok.kind == "ident":
            return is_var_name(tok.text) or is_const_name(tok.text)
        return self.at("!") or self.at("(")

    # formulas

    def formula(self) -> Formula:
        left = self.imp()
        if self.at("<->"):
            self.i += 1
            right = self.imp()
            return And(Implies(left, right), Implies(right, left))
        return left

    def imp(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return Implies(left, self.imp())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.at("|"):
            self.i += 1
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.prefix()
        while self.at("&"):
            self.i += 1
            f = And(f, self.prefix())
        return f

    def agent(self) -> str:
        tok = self.tok
        if tok.kind not in ("ident", "kw"):
            raise self.error("agent identifier expected")
        if self.agents is not None and tok.text not in self.agents:
            raise self.error(f"unknown agent {tok.text!r}")
        self.i += 1
        return tok.text

    def prefix(self) -> Formula:
        if self.at("~"):
            self.i += 1
            return Not(self.prefix())
        if self.at("K"):
            self.i += 1
            return K(self.prefix())
        if self.at("[]"):
            self.i += 1
            return Box(self.prefix())
        if self.at("<>"):
            self.i += 1
            return Diamond(self.prefix())
        if self.at("["):
            self.i += 1
            if self.at("]"):
                # "[ ]" written with a space
                self.i += 1
                return Box(self.prefix())
            agent = self.agent()
            self.expect("]")
            return Stit(agent, self.prefix())
        if self.at("E"):
            self.i += 1
            return E(self.term())
        if self.starts_term():
            proves = self.try_proves()
            if proves is not None:
                return proves
        return self.primary()

    def try_proves(self) -> Optional[Formula]:
        start = self.i
        try:
            t = self.term()
        except ParseError:
            if self.at_ident_term(start):
                raise
            self.i = start
            return None
        if self.at(":"):
            self.i += 1
            return Proves(t, self.prefix())
        if self.at_ident_term(start):
            raise self.error(f"expected ':' after term, found {self.tok.text or 'end of input'!r}")
        # a parenthesised formula, not a term
        self.i = start
        return None

    def at_ident_term(self, start: int) -> bool:
        return self.toks[start].kind == "ident" or self.toks[start].text == "!"

    def primary(self) -> Formula:
        tok = self.tok
        if tok.kind == "ident":
            if is_atom_name(tok.text):
                self.i += 1
                return Atom(tok.text)
            raise self.error(f"{tok.text!r} is not a propositional variable")
        if self.at("false"):
            self.i += 1
            return FALSE
        if self.at("Prove"):
            self.i += 1
            self.expect("(")
            agent = self.agent()
            self.expect(",")
            t = self.term()
            self.expect(",")
            body = self.formula()
            self.expect(")")
            return Prove(agent, t, body)
        if self.at("Proven"):
            self.i += 1
            self.expect("(")
            t = self.term()
            self.expect(",")
            body = self.formula()
            self.expect(")")
            return Proven(t, body)
        if self.at("("):
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        raise self.error(f"formula expected, found {tok.text or 'end of input'!r}")


def parse_formula(text: str, agents: Optional[Iterable[str]] = None) -> Formula:
    """Parse ``text`` into a formula.

    When ``agents`` is given, every ``[j]`` and ``Prove(j, ...)`` must name
    one of them.
    """
    p = _Parser(text, agents)
    f = p.formula()
    p.finish()
    return f


def parse_term(text: str) -> ProofTerm:
    p = _Parser(text)
    t = p.term()
    p.finish()
    return t


# ---------------------------------------------------------------------------
# Printer

_IMP, _OR, _AND, _PREFIX = 1, 2, 3, 4
_SUM, _PROD, _UNARY = 1, 2, 3


def _term_prec(t: ProofTerm) -> int:
    if isinstance(t, Sum):
        return _SUM
    if isinstance(t, App):
        return _PROD
    return _UNARY


def print_term(t: ProofTerm) -> str:
    return _pt(t, _SUM)


def _pt(t: ProofTerm, ctx: int) -> str:
    if isinstance(t, (Var, Const)):
        return t.name
    if isinstance(t, Check):
        s = "!" + _pt(t.inner, _UNARY)
    elif isinstance(t, Sum):
        s = f"{_pt(t.left, _SUM)} + {_pt(t.right, _PROD)}"
    elif isinstance(t, App):
        s = f"{_pt(t.left, _PROD)}*{_pt(t.right, _UNARY)}"
    else:
        raise TypeError(f"not a proof term: {t!r}")
    return f"({s})" if _term_prec(t) < ctx else s


def _prec(f: Formula) -> int:
    if isinstance(f, Implies):
        return _IMP
    if isinstance(f, Or):
        return _OR
    if isinstance(f, And):
        return _AND
    return _PREFIX


def _glue(op: str, operand: str) -> str:
    # keyword operators need a space before an identifier
    if operand[:1].isalnum() or operand[:1] in "_!":
        return f"{op} {operand}"
    return op + operand


def print_formula(f: Formula) -> str:
    """Render ``f`` in the concrete grammar with minimal parentheses."""
    return _pf(f, _IMP)


def _pf(f: Formula, ctx: int) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Falsum):
        return "false"
    if isinstance(f, Implies):
        s = f"{_pf(f.left, _OR)} -> {_pf(f.right, _IMP)}"
    elif isinstance(f, Or):
        s = f"{_pf(f.left, _OR)} | {_pf(f.right, _AND)}"
    elif isinstance(f, And):
        s = f"{_pf(f.left, _AND)} & {_pf(f.right, _PREFIX)}"
    elif isinstance(f, Not):
        s = "~" + _pf(f.body, _PREFIX)
    elif isinstance(f, Box):
        s = "[]" + _pf(f.body, _PREFIX)
    elif isinstance(f, Diamond):
        s = "<>" + _pf(f.body, _PREFIX)
    elif isinstance(f, Stit):
        s = f"[{f.agent}]" + _pf(f.body, _PREFIX)
    elif isinstance(f, K):
        s = _glue("K", _pf(f.body, _PREFIX))
    elif isinstance(f, E):
        s = _glue("E", print_term(f.term))
    elif isinstance(f, Proves):
        s = f"{print_term(f.term)}:{_pf(f.body, _PREFIX)}"
    elif isinstance(f, Prove):
        s = f"Prove({f.agent}, {print_term(f.term)}, {_pf(f.body, _IMP)})"
    elif isinstance(f, Proven):
        s = f"Proven({print_term(f.term)}, {_pf(f.body, _IMP)})"
    else:
        raise TypeError(f"not a formula: {f!r}")
    return f"({s})" if _prec(f) < ctx else s


# ---------------------------------------------------------------------------
# Traversals


def subterms(t: ProofTerm) -> Iterator[ProofTerm]:
    yield t
    if isinstance(t, (Sum, App)):
        yield from subterms(t.left)
        yield from subterms(t.right)
    elif isinstance(t, Check):
        yield from subterms(t.inner)


def children(f: Formula) -> tuple:
    if isinstance(f, (And, Or, Implies)):
        return (f.left, f.right)
    if isinstance(f, (Not, Stit, Box, Diamond, K, Proves, Prove, Proven)):
        return (f.body,)
    return ()


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from subformulas(c)


def terms_of(f: Formula) -> set:
    """All subterms of terms occurring in ``f``."""
    out = set()
    for g in subformulas(f):
        t = getattr(g, "term", None)
        if t is not None:
            out.update(subterms(t))
    return out


@lru_cache(maxsize=65536)
def _subformula_set(f: Formula) -> frozenset:
    return frozenset(subformulas(f))


def atoms_of(f: Formula) -> set:
    return {g for g in _subformula_set(f) if isinstance(g, Atom)}


def agents_of(f: Formula) -> set:
    return {g.agent for g in _subformula_set(f) if isinstance(g, (Stit, Prove))}


def closure_universe(seed_formulas: Iterable[Formula],
                     seed_terms: Iterable[ProofTerm] = ()) -> tuple[frozenset, frozenset]:
    """Subformula closure of the formula seeds and subterm closure of every
    term seed or term occurring in a formula seed."""
    formulas = set()
    terms = set()
    for f in seed_formulas:
        formulas.update(_subformula_set(f))
    for g in formulas:
        t = getattr(g, "term", None)
        if t is not None:
            terms.update(subterms(t))
    for t in seed_terms:
        terms.update(subterms(t))
    return frozenset(formulas), frozenset(terms)
