"""Command-line front end: parse -> check/synthesize/unroll -> JSON report.

Subcommands:
  check       verify a given invariant candidate and derive certificates
  synthesize  search for an invariant automatically (or from a template file)
  unroll      Kleene-iterate the loop on the oracle for certified lower bounds
  expand      series-expand a closed-form expression
  chain       expected visiting times of a finite Markov chain (text format),
              optionally compared against the best contraction-invariant bound

Exit codes: 0 full certificate, 2 partial/unknown outcome, 1 error.
Reports are deterministic JSON (timing fields aside).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction
from typing import Dict, List, Optional

from . import __version__
from .algebra import (
    AlgebraError,
    ClosedForm,
    ExtendedMass,
    GfSyntaxError,
    format_closed_form,
    format_monomial,
    mono_key,
    parse_closed_form,
    series_expand,
)
from .invariant import Certificate, CertificateKind, Verdict, certify
from .oracle import (
    Diverges,
    FiniteChain,
    OracleError,
    best_contraction_bound,
    chain_occupation,
    chain_posterior,
    crosscheck,
    kleene_iterate,
    measure_from_closed_form,
)
from .program import ProgramAst, ProgramError, While, classify, parse
from .semantics import SemanticsError
from .synthesis import (
    Failure,
    ProgramAnalysis,
    SynthesisConfig,
    analyze_program,
    parse_template,
)

EXIT_FULL = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _digest(data: str) -> str:
    return hashlib.sha256(data.encode()).hexdigest()[:16]


def _mass_str(m) -> Optional[str]:
    if m is None:
        return None
    if isinstance(m, ExtendedMass):
        return str(m)
    return str(m)


def _form_str(f: Optional[ClosedForm], order=None) -> Optional[str]:
    return None if f is None else format_closed_form(f, order)


def _cert_payload(cert: Certificate, order) -> Dict:
    return {
        "kind": cert.kind.value,
        "verdict": cert.verdict.value,
        "invariant": _form_str(cert.invariant, order),
        "posterior": _form_str(cert.posterior, order),
        "masses": {
            "initial": _mass_str(cert.mass_initial),
            "invariant": _mass_str(cert.mass_invariant),
            "posterior": _mass_str(cert.mass_posterior),
        },
        "ert_upper_bound": _mass_str(cert.ert_upper_bound),
        "past": cert.past,
    }


def _analysis_report(analysis: ProgramAnalysis, order) -> Dict:
    report: Dict = {"diagnostics": []}
    if analysis.failure is not None:
        report["outcome"] = f"failure:{analysis.failure.stage}"
        report["diagnostics"] = list(analysis.failure.diagnostics)
        report["message"] = analysis.failure.message
        if analysis.failure.candidate is not None:
            report["candidate"] = _form_str(analysis.failure.candidate, order)
    elif analysis.certificate is not None:
        report["outcome"] = analysis.certificate.kind.value
        report.update(_cert_payload(analysis.certificate, order))
        if analysis.final_measure is not None:
            report["final_measure"] = _form_str(analysis.final_measure, order)
    else:
        report["outcome"] = "no-loop"
        if analysis.final_measure is not None:
            report["final_measure"] = _form_str(analysis.final_measure, order)
    loops = [s for s in analysis.segments if s.kind == "loop"]
    if len(loops) > 1:
        report["loop_outcomes"] = [
            (s.outcome.kind.value if isinstance(s.outcome, Certificate)
             else f"failure:{s.outcome.stage}")
            for s in loops
        ]
    return report


def _emit(report: Dict, out) -> None:
    json.dump(report, out, indent=2, sort_keys=True, default=str)
    out.write("\n")


def _outcome_exit(report: Dict) -> int:
    if report.get("outcome") == CertificateKind.EXACT_POSTERIOR.value:
        return EXIT_FULL
    return EXIT_PARTIAL


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _load_program(path: str) -> ProgramAst:
    return parse(_read(path))


def _gf_arg(text: str, variables) -> ClosedForm:
    if text.startswith("@"):
        text = _read(text[1:])
    return parse_closed_form(text, variables)


def cmd_check(args, out) -> int:
    t0 = time.monotonic()
    ast = _load_program(args.program)
    cls = classify(ast)
    if not cls.is_single_loop:
        raise ProgramError("check requires a program that is a single while loop")
    loop = ast.body if isinstance(ast.body, While) else ast.body.stmts[0]
    g = _gf_arg(args.init, ast.variables)
    candidate = _gf_arg(args.invariant, ast.variables)
    t1 = time.monotonic()
    verdict, cert = certify(loop, g, candidate, refute_degree=args.refute_degree)
    t2 = time.monotonic()
    report = {
        "tool": "gfinv",
        "version": __version__,
        "mode": "check",
        "program_digest": _digest(_read(args.program)),
        "verdict": verdict.value,
        "timing": {"parse_s": t1 - t0, "check_s": t2 - t1},
        "diagnostics": [],
    }
    if cert is not None:
        report["outcome"] = cert.kind.value
        report.update(_cert_payload(cert, list(ast.variables)))
    else:
        report["outcome"] = f"not-certified:{verdict.value}"
    _emit(report, out)
    return _outcome_exit(report)


def cmd_synthesize(args, out) -> int:
    t0 = time.monotonic()
    ast = _load_program(args.program)
    g = _gf_arg(args.init, ast.variables)
    config = SynthesisConfig(max_den_degree=args.max_degree, timeout_s=args.timeout)
    branch = os.environ.get("GFINV_BRANCH_LIMIT")
    if branch:
        config.solver.branch_limit = int(branch)
    if args.template:
        config.user_template = parse_template(_read(args.template), ast.variables)
    t1 = time.monotonic()
    analysis = analyze_program(ast, g, config)
    t2 = time.monotonic()
    report = {
        "tool": "gfinv",
        "version": __version__,
        "mode": "synthesize",
        "program_digest": _digest(_read(args.program)),
        "timing": {"parse_s": t1 - t0, "synthesize_s": t2 - t1},
    }
    report.update(_analysis_report(analysis, list(ast.variables)))
    _emit(report, out)
    return _outcome_exit(report)


def cmd_unroll(args, out) -> int:
    t0 = time.monotonic()
    ast = _load_program(args.program)
    cls = classify(ast)
    if not cls.is_single_loop:
        raise ProgramError("unroll requires a program that is a single while loop")
    loop = ast.body if isinstance(ast.body, While) else ast.body.stmts[0]
    g = _gf_arg(args.init, ast.variables)
    m = measure_from_closed_form(g, args.init_degree, ast.variables)
    res = kleene_iterate(loop, m, ast.variables, args.steps, support_cap=args.cap)
    t1 = time.monotonic()
    order = list(ast.variables)

    def fmt(measure):
        out_map = {}
        for s, v in measure.entries.items():
            mono = tuple(sorted((n, e) for n, e in zip(ast.variables, s) if e))
            out_map[format_monomial(mono, order)] = str(v)
        return dict(sorted(out_map.items()))

    report = {
        "tool": "gfinv",
        "version": __version__,
        "mode": "unroll",
        "program_digest": _digest(_read(args.program)),
        "outcome": "lower-bounds",
        "steps": args.steps,
        "occupation_lower": fmt(res.occ_lower),
        "posterior_lower": fmt(res.post_lower),
        "residual": str(res.residual),
        "timing": {"unroll_s": t1 - t0},
        "diagnostics": [],
    }
    _emit(report, out)
    return EXIT_FULL


def cmd_expand(args, out) -> int:
    t0 = time.monotonic()
    f = parse_closed_form(args.expression)
    coeffs = series_expand(f, args.degree)
    t1 = time.monotonic()
    order = sorted(f.vars())
    table = {format_monomial(m, order): str(c)
             for m, c in sorted(coeffs.items(), key=lambda t: mono_key(t[0], order))}
    report = {
        "tool": "gfinv",
        "version": __version__,
        "mode": "expand",
        "program_digest": _digest(args.expression),
        "outcome": "expanded",
        "degree": args.degree,
        "coefficients": table,
        "timing": {"expand_s": t1 - t0},
        "diagnostics": [],
    }
    _emit(report, out)
    return EXIT_FULL


def cmd_chain(args, out) -> int:
    t0 = time.monotonic()
    chain = FiniteChain.parse(_read(args.chain))
    occ = chain_occupation(chain)
    post = chain_posterior(chain, occ)
    t1 = time.monotonic()
    report = {
        "tool": "gfinv",
        "version": __version__,
        "mode": "chain",
        "program_digest": _digest(_read(args.chain)),
        "outcome": "occupation",
        "occupation": {s: ("oo" if v is None else str(v)) for s, v in occ.items()},
        "posterior": {s: str(v) for s, v in post.items()},
        "timing": {"chain_s": t1 - t0},
        "diagnostics": [],
    }
    if args.contraction is not None:
        c = Fraction(args.contraction)
        try:
            bound = best_contraction_bound(chain, c)
            report["contraction_factor"] = str(c)
            report["contraction_posterior_bound"] = {s: str(v) for s, v in bound.items()}
            improves = all(
                Fraction(post.get(s, 0)) <= bound[s] for s in bound
            ) and any(Fraction(post.get(s, 0)) < bound[s] for s in bound
                      if s not in chain.transitions)
            report["occupation_improves_contraction"] = improves
            if improves:
                report["diagnostics"].append(
                    "exact occupation posterior is pointwise below the best "
                    f"{c}-contraction bound (strictly at some state)")
        except Diverges as e:
            report["contraction_factor"] = str(c)
            report["diagnostics"].append(str(e))
    _emit(report, out)
    return EXIT_FULL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gfinv",
        description="Exact posterior inference and occupation-invariant synthesis "
                    "for discrete probabilistic loops.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="verify an invariant candidate")
    c.add_argument("program")
    c.add_argument("--init", required=True, help="initial measure (closed form)")
    c.add_argument("--invariant", required=True,
                   help="candidate closed form, or @file")
    c.add_argument("--refute-degree", type=int, default=25)
    c.set_defaults(fn=cmd_check)

    s = sub.add_parser("synthesize", help="search for an invariant")
    s.add_argument("program")
    s.add_argument("--init", required=True)
    s.add_argument("--template", help="user template file")
    s.add_argument("--max-degree", type=int, default=3,
                   help="maximum denominator total degree")
    s.add_argument("--timeout", type=float, default=60.0)
    s.set_defaults(fn=cmd_synthesize)

    u = sub.add_parser("unroll", help="oracle lower bounds by loop unrolling")
    u.add_argument("program")
    u.add_argument("--init", required=True)
    u.add_argument("--steps", type=int, required=True)
    u.add_argument("--cap", type=int, default=64, help="support cap per sampling")
    u.add_argument("--init-degree", type=int, default=24,
                   help="truncation degree for the initial measure")
    u.set_defaults(fn=cmd_unroll)

    e = sub.add_parser("expand", help="series-expand a closed form")
    e.add_argument("expression")
    e.add_argument("--degree", type=int, required=True)
    e.set_defaults(fn=cmd_expand)

    ch = sub.add_parser("chain", help="finite-chain expected visiting times")
    ch.add_argument("chain", help="chain file: 'src dst prob' and 'init state mass' lines")
    ch.add_argument("--contraction", help="compare against best c-contraction bound")
    ch.set_defaults(fn=cmd_chain)
    return p


def run(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_FULL
    try:
        return args.fn(args, out)
    except (ProgramError, GfSyntaxError, AlgebraError, SemanticsError,
            OracleError, ValueError, OSError) as e:
        print(f"gfinv: error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
