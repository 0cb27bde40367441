#!/usr/bin/env python3
"""Run the whole benchmark corpus and print a summary table.

Each benchmarks/<name>/ directory holds program.pgcl, init.gf, expected.json
and optionally a user template or candidate invariant.  The table reports the
outcome, wall time, and whether the expected closed forms were reproduced
exactly.
"""

import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gfinv.algebra import equal, format_closed_form, parse_closed_form
from gfinv.invariant import certify
from gfinv.program import While, parse, top_level_segments
from gfinv.synthesis import SynthesisConfig, analyze_program, parse_template

BENCH = Path(__file__).resolve().parent.parent / "benchmarks"


def run_one(d: Path):
    ast = parse((d / "program.pgcl").read_text())
    init = parse_closed_form((d / "init.gf").read_text().strip(), ast.variables)
    expected = json.loads((d / "expected.json").read_text())
    t0 = time.monotonic()
    if expected["mode"] == "check":
        cand = parse_closed_form((d / expected["invariant_file"]).read_text(),
                                 ast.variables)
        loop = next(s for s in top_level_segments(ast) if isinstance(s, While))
        _, cert = certify(loop, init, cand)
        failure = None
    else:
        cfg = SynthesisConfig(max_den_degree=expected.get("max_degree", 3))
        if "template" in expected:
            cfg.user_template = parse_template((d / expected["template"]).read_text(),
                                               ast.variables)
        analysis = analyze_program(ast, init, cfg)
        cert, failure = analysis.certificate, analysis.failure
    elapsed = time.monotonic() - t0

    if failure is not None:
        outcome = f"failure:{failure.stage}"
    elif cert is not None:
        outcome = cert.kind.value
    else:
        outcome = "none"
    want = expected["outcome"]
    ok = outcome.startswith(want.split(":")[0]) if want != "failure" \
        else outcome.startswith("failure")
    detail = ""
    if cert is not None and expected.get("invariant"):
        known = parse_closed_form(expected["invariant"], ast.variables)
        ok = ok and equal(cert.invariant, known)
        detail = format_closed_form(cert.invariant, list(ast.variables))
    elif failure is not None and failure.candidate is not None:
        detail = "pos? " + format_closed_form(failure.candidate, list(ast.variables))
    return outcome, elapsed, ok, detail


def main():
    rows = []
    for d in sorted(p for p in BENCH.iterdir() if p.is_dir()):
        outcome, elapsed, ok, detail = run_one(d)
        rows.append((d.name, elapsed, outcome, "ok" if ok else "MISMATCH", detail))
    width = max(len(r[0]) for r in rows)
    print(f"{'benchmark':<{width}}  {'time (s)':>9}  {'outcome':<20}  {'?':<8}  detail")
    for name, elapsed, outcome, ok, detail in rows:
        print(f"{name:<{width}}  {elapsed:>9.3f}  {outcome:<20}  {ok:<8}  {detail}")
    bad = [r for r in rows if r[3] != "ok"]
    print(f"\n{len(rows) - len(bad)}/{len(rows)} benchmarks behaved as expected")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
