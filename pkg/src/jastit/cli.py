"""Command-line front end.

Exit codes: 0 for success, truth, acceptance or a witness found; 1 for
falsity, an invalid model, a rejected proof or no witness; 2 for usage and
input errors, with a diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from .model import EvalPoint, ModelError, load_model, validate
from .proofs import ConstantSpec, ProofFormatError, check_proof, parse_proof
from .search import SearchBounds, SearchExhausted, SearchStats, find_countermodel, find_model, random_model
from .semantics import SemanticsError, expand_defined, satisfies, valid_in_model
from .syntax import ParseError, parse_formula, parse_term, print_formula

OK, NO, USAGE = 0, 1, 2

CS_CHOICES = ("empty", "axiomatic", "iterated")
RANGE_CHOICES = ("A0-A9", "A1-A9")


class InputError(Exception):
    """Malformed user input; reported on stderr with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: error: {message}")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _formula(text: str, agents=None):
    try:
        return parse_formula(text, agents)
    except ParseError as exc:
        raise InputError(f"formula: {exc.annotated()}") from None


def _model(path: str, cs=None, normality_range=None):
    try:
        return load_model(_read(path), cs=cs, normality_range=normality_range)
    except (ModelError, ParseError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, sort_keys=True) if args.json else text)


def cmd_parse(args) -> int:
    f = _formula(args.formula)
    canon = print_formula(f)
    _emit(args, {"formula": canon}, canon)
    return OK


def cmd_expand(args) -> int:
    f = expand_defined(_formula(args.formula))
    canon = print_formula(f)
    _emit(args, {"formula": canon}, canon)
    return OK


def cmd_check_model(args) -> int:
    model = _model(args.file, args.cs, args.normality_range)
    report = validate(model)
    _emit(args, report.to_json(), str(report))
    return OK if report.ok else NO


def cmd_eval(args) -> int:
    model = _model(args.file)
    f = _formula(args.formula, model.agents)
    try:
        if args.valid:
            verdict = valid_in_model(model, f)
            payload = {"valid": verdict.valid,
                       "counterexample": str(verdict.counterexample) if verdict.counterexample else None}
            text = "valid" if verdict.valid else f"not valid: fails at {verdict.counterexample}"
            _emit(args, payload, text)
            return OK if verdict.valid else NO
        moment, sep, history = args.at.partition("/")
        if not sep:
            raise InputError(f"--at expects <moment>/<history>, got {args.at!r}")
        value = satisfies(model, EvalPoint(moment, history), f)
    except SemanticsError as exc:
        raise InputError(str(exc)) from None
    _emit(args, {"at": args.at, "value": value}, "true" if value else "false")
    return OK if value else NO


def cmd_check_proof(args) -> int:
    cs = ConstantSpec.named(args.cs) if args.cs else None
    nec = None if args.nec is None else args.nec == "on"
    try:
        proof = parse_proof(_read(args.file), cs=cs, nec_enabled=nec)
    except ProofFormatError as exc:
        raise InputError(f"{args.file}: {exc.annotated()}") from None
    verdict = check_proof(proof)
    payload = {"accepted": verdict.accepted, "steps": verdict.steps, "index": verdict.index,
               "reason": verdict.reason, "detail": verdict.detail or None}
    _emit(args, payload, verdict.summary())
    return OK if verdict.accepted else NO


def _bounds(args, seed_required=False) -> SearchBounds:
    agents = tuple(a.strip() for a in args.agents.split(",") if a.strip())
    try:
        terms = [parse_term(t.strip()) for t in args.terms.split(",") if t.strip()] if args.terms else []
    except ParseError as exc:
        raise InputError(f"--terms: {exc.annotated()}") from None
    atoms = [a.strip() for a in args.atoms.split(",") if a.strip()] if args.atoms else []
    randomized = getattr(args, "random", None) is not None
    if (randomized or seed_required) and args.seed is None:
        raise InputError("random generation needs --seed")
    try:
        return SearchBounds(
            args.max_moments, agents, frozenset(terms), frozenset(atoms),
            mode="randomized" if randomized else "exhaustive",
            sample_count=args.random or 0, seed=args.seed,
            relations=args.relations, cs=args.cs)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _search(args, finder) -> int:
    bounds = _bounds(args)
    f = _formula(args.formula, bounds.agents)
    stats = SearchStats()
    found = finder(f, bounds, stats, args.jobs)
    if args.jobs <= 1:
        print(f"search: {stats}", file=sys.stderr)
    if found is None:
        _emit(args, {"found": False}, "none")
        return NO
    model, point = found
    if args.json:
        print(json.dumps({"found": True, "point": str(point), "model": model.to_document()},
                         sort_keys=True))
    else:
        print(f"found at {point}")
        print(model.to_json(indent=2))
    return OK


def cmd_find_model(args) -> int:
    return _search(args, find_model)


def cmd_find_countermodel(args) -> int:
    return _search(args, find_countermodel)


def cmd_gen(args) -> int:
    args.random = None
    bounds = _bounds(args, seed_required=True)
    try:
        model = random_model(bounds)
    except SearchExhausted as exc:
        print(f"gen: {exc}", file=sys.stderr)
        return NO
    print(json.dumps(model.to_document(), sort_keys=True) if args.json else model.to_json(indent=2))
    return OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jastit", description="Toolkit for the stit logic of justification announcements.")
    p.add_argument("-v", "--verbose", action="store_true", help="log search progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--json", action="store_true", help="print one JSON object")
        sp.set_defaults(func=func)
        return sp

    sp = command("parse", cmd_parse, "print the canonical form of a formula")
    sp.add_argument("formula")

    sp = command("expand", cmd_expand, "unfold Prove and Proven into primitive modalities")
    sp.add_argument("formula")

    sp = command("check-model", cmd_check_model, "validate a model file against all constraints")
    sp.add_argument("file", help="model JSON, or - for stdin")
    sp.add_argument("--cs", choices=CS_CHOICES)
    sp.add_argument("--normality-range", choices=RANGE_CHOICES)

    sp = command("eval", cmd_eval, "evaluate a formula in a model")
    sp.add_argument("file", help="model JSON, or - for stdin")
    sp.add_argument("formula")
    where = sp.add_mutually_exclusive_group(required=True)
    where.add_argument("--at", metavar="MOMENT/HISTORY")
    where.add_argument("--valid", action="store_true", help="check truth at every point")

    sp = command("check-proof", cmd_check_proof, "check a Hilbert-style proof file")
    sp.add_argument("file", help="proof file, or - for stdin")
    sp.add_argument("--cs", choices=CS_CHOICES, help="override the @cs directive")
    sp.add_argument("--nec", choices=("on", "off"), help="override the @nec directive")

    def search_flags(sp, randomizable=True):
        sp.add_argument("--max-moments", type=int, required=True)
        sp.add_argument("--agents", default="j", help="comma-separated agent names")
        sp.add_argument("--terms", default="", help="comma-separated extra proof terms")
        sp.add_argument("--atoms", default="", help="comma-separated extra atoms")
        sp.add_argument("--relations", choices=("all", "uni"), default="all",
                        help="range R_e freely above R, or fix R_e = R")
        sp.add_argument("--cs", choices=CS_CHOICES, default="axiomatic")
        sp.add_argument("--seed", type=int)
        if randomizable:
            sp.add_argument("--random", type=int, metavar="N", help="sample N random models instead")
            sp.add_argument("--jobs", type=int, default=1, help="worker processes for exhaustive search")

    for name, func, text in (("find-model", cmd_find_model, "search for a model and point satisfying a formula"),
                             ("find-countermodel", cmd_find_countermodel, "search for a point falsifying a formula")):
        sp = command(name, func, text)
        sp.add_argument("formula")
        search_flags(sp)

    sp = command("gen", cmd_gen, "emit one random validator-clean model")
    search_flags(sp, randomizable=False)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except InputError as exc:
        print(exc, file=sys.stderr)
        return USAGE


run = main


if __name__ == "__main__":
    sys.exit(main())
