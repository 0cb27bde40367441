import random
from fractions import Fraction as F

import pytest

from gfinv.algebra import (
    ClosedForm,
    Polynomial,
    equal,
    format_closed_form,
    from_poly,
    instantiate,
    normalize,
    series_expand,
)
from gfinv.invariant import CertificateKind
from gfinv.program import parse
from gfinv.synthesis import (
    Failure,
    PolySystem,
    Positivity,
    SynthesisConfig,
    Template,
    analyze_program,
    build_system,
    enumerate_templates,
    export_smtlib,
    import_smt_model,
    parse_template,
    positivity_check,
    solve_system,
    synthesize,
)

ONE = Polynomial.const(1)
X = Polynomial.var("x")
C = Polynomial.var("c")

GEO = parse("nat x; nat c;\nwhile (x = 1) { { c := c + 1 } [1/2] { x := 0 } }")
G_X = from_poly(X)
OCC = normalize(ONE + 2 * X, 2 - C)


class TestEnumerate:
    def test_single_var_stream_shape(self):
        tpls = list(enumerate_templates(["x"], 1))
        assert len(tpls) == 2
        # first: a0 / 1
        assert tpls[0].form.den == ONE and tpls[0].parameters == ("a0",)
        # second: (a0 + a1*X)/(1 + b1*X)
        second = tpls[1]
        assert set(second.parameters) == {"a0", "a1", "b1"}
        assert second.form.den.constant_term() == 1
        assert second.form.den.degree_in("x") == 1
        assert second.form.num.degree_in("x") == 1

    def test_two_var_degree_one_support(self):
        tpl = list(enumerate_templates(["c", "x"], 1))[1]
        num_monos = set(tpl.form.num.terms)
        assert (("c", 1),) in {tuple(p for p in m if not p[0].startswith("$"))
                               for m in num_monos}
        assert len(tpl.parameters) == 5  # 3 numerator + 2 denominator

    def test_degree_zero_polynomial_over_constant(self):
        tpls = list(enumerate_templates(["x", "c"], 0))
        assert len(tpls) == 1 and tpls[0].form.den == ONE

    def test_deterministic(self):
        a = [t.form.num.terms.keys() for t in enumerate_templates(["x", "c"], 2)]
        b = [t.form.num.terms.keys() for t in enumerate_templates(["x", "c"], 2)]
        assert [set(k) for k in a] == [set(k) for k in b]


class TestBuildAndSolve:
    def test_geometric_system_recovers_scaled_tau(self):
        # the d=1 template recovers the known invariant up to the pinned scale
        tpl = list(enumerate_templates(["c", "x"], 1))[1]
        system = build_system(tpl, GEO.body, G_X)
        vals = solve_system(system)
        assert vals, "geometric system must be solvable"
        forms = [instantiate(tpl.form, v.assignment) for v in vals]
        assert any(equal(f, OCC) for f in forms)

    def test_unpinned_system_contains_published_solution(self):
        tpl = unpinned_geometric_template()
        system = build_system(tpl, GEO.body, G_X)
        tau = {"a0": F(1), "a1": F(2), "a2": F(0), "a3": F(0),
               "b0": F(2), "b1": F(0), "b2": F(-1)}
        for e in system.equations:
            total = F(0)
            for m, coeff in e.terms.items():
                term = coeff
                for v, exp in m:
                    term *= tau[v[1:]] ** exp
                total += term
            assert total == 0

    def test_trivial_fixed_point_system(self):
        loop = parse("nat x;\nwhile (x < 0) { skip }").body
        tpl = Template(from_poly(Polynomial.var("$t") * X), ("t",), "user")
        system = build_system(tpl, loop, G_X)
        vals = solve_system(system)
        assert any(v.assignment["t"] == 1 for v in vals)

    def test_underdegree_template_unsat(self):
        walk = parse("nat x;\nwhile (x > 0) { { x := x - 1 } [1/2] { x := x + 1 } }")
        tpl = list(enumerate_templates(["x"], 0))[0]  # a0 only
        system = build_system(tpl, walk.body, G_X)
        assert solve_system(system) == []

    def test_linear_example(self):
        system = PolySystem((Polynomial.var("$a") - 2 * Polynomial.var("$b"),
                             Polynomial.var("$b") - 3), ("a", "b"))
        vals = solve_system(system)
        assert [dict(v.assignment) for v in vals] == [{"a": F(6), "b": F(3)}]

    def test_no_rational_solution(self):
        system = PolySystem((Polynomial.var("$a") ** 2 + 1,), ("a",))
        assert solve_system(system) == []

    def test_solver_soundness_on_random_systems(self):
        rng = random.Random(11)
        names = ["$a", "$b", "$c"]
        for _ in range(25):
            eqs = []
            for _ in range(rng.randrange(1, 4)):
                p = Polynomial.zero()
                for _ in range(rng.randrange(1, 4)):
                    mono = tuple(sorted({n: rng.randrange(0, 2) for n in
                                         rng.sample(names, rng.randrange(1, 3))}.items()))
                    mono = tuple((v, e) for v, e in mono if e)
                    p = p + Polynomial.monomial(mono, F(rng.randrange(-3, 4)))
                if not p.is_zero():
                    eqs.append(p)
            if not eqs:
                continue
            system = PolySystem(tuple(eqs), ("a", "b", "c"))
            for val in solve_system(system):
                for e in system.equations:
                    total = F(0)
                    for m, coeff in e.terms.items():
                        term = coeff
                        for v, exp in m:
                            term *= val.assignment[v[1:]] ** exp
                        total += term
                    assert total == 0


class TestPositivity:
    def test_occupation_form(self):
        assert positivity_check(OCC) == Positivity.NONNEG

    def test_sequential_loops_diagnostic_form(self):
        mixed = normalize(2 * C, C * C - 3 * C + 2) + from_poly(ONE)
        assert positivity_check(mixed) == Positivity.UNKNOWN
        # ... even though the series is in fact nonnegative
        assert all(v >= 0 for v in series_expand(mixed, 15).values())

    def test_negation_pattern(self):
        f = ClosedForm(-X, Polynomial.const(-1) + C * F(1, 2))
        assert positivity_check(f) == Positivity.NONNEG

    def test_nonneg_verdict_implies_nonneg_series(self, corpus):
        # internal consistency on every stored closed form in the corpus
        from gfinv.algebra import parse_closed_form
        for name, (ast, init, expected, d) in corpus.items():
            for key in ("invariant", "posterior"):
                text = expected.get(key)
                if not text:
                    continue
                f = parse_closed_form(text, ast.variables)
                if positivity_check(f) == Positivity.NONNEG:
                    assert all(v >= 0 for v in series_expand(f, 15).values()), name


def unpinned_geometric_template():
    """Paper-style template with a free denominator constant."""
    names = ["a0", "a1", "a2", "a3", "b0", "b1", "b2"]
    a0, a1, a2, a3, b0, b1, b2 = [Polynomial.var("$" + n) for n in names]
    form = ClosedForm(a0 + a1 * X + a2 * C + a3 * X * X, b0 + b1 * X + b2 * C)
    return Template(form, tuple(names), "user")


class TestScalingQuotient:
    def test_scaling_all_parameters_gives_same_form(self):
        # justifies pinning the denominator constant: valuations that differ
        # by a global scale encode the same series
        rng = random.Random(23)
        tpl = unpinned_geometric_template()
        tau = {"a0": F(1), "a1": F(2), "a2": F(0), "a3": F(0),
               "b0": F(2), "b1": F(0), "b2": F(-1)}
        f0 = instantiate(tpl.form, tau)
        assert equal(f0, OCC)
        for _ in range(100):
            k = F(rng.randrange(1, 9), rng.randrange(1, 9))
            if rng.random() < 0.5:
                k = -k
            scaled = {p: v * k for p, v in tau.items()}
            assert equal(instantiate(tpl.form, scaled), f0)


class TestSynthesize:
    def test_geometric_auto(self):
        res = synthesize(GEO.body, G_X, SynthesisConfig(max_den_degree=1))
        assert res.kind == CertificateKind.EXACT_POSTERIOR
        assert equal(res.invariant, OCC)
        assert equal(res.posterior, normalize(ONE, 2 - C))

    def test_nontermination_fails_with_divergence_hint(self):
        loop = parse("nat x;\nwhile (x = 1) { skip }").body
        g = normalize(X + Polynomial.var("x", 2), Polynomial.const(2))
        res = synthesize(loop, g, SynthesisConfig(max_den_degree=2))
        assert isinstance(res, Failure)
        assert any("infinite coefficient" in d for d in res.diagnostics)

    def test_random_walk_upper_bound(self):
        walk = parse("nat x;\nwhile (x > 0) { { x := x - 1 } [1/2] { x := x + 1 } }")
        res = synthesize(walk.body, G_X, SynthesisConfig(max_den_degree=1))
        assert res.kind == CertificateKind.UPPER_BOUND_ONLY
        assert equal(res.invariant, normalize(ONE + X, ONE - X))

    def test_enumeration_completeness_denominator_degree_two(self, corpus):
        # every corpus benchmark with a known rational invariant of
        # denominator degree <= 2 is reached by the degree-2 enumeration
        from gfinv.algebra import parse_closed_form
        from gfinv.program import While, top_level_segments
        for name in ("geometric", "faulty_decrement", "geometric_counter",
                      "random_walk", "modulo_geometric", "cond_and_corrected"):
            ast, init, expected, _ = corpus[name]
            known = parse_closed_form(expected["invariant"], ast.variables)
            if known.den.total_degree() > 2:
                continue
            loop = next(s for s in top_level_segments(ast) if isinstance(s, While))
            found = False
            for tpl in enumerate_templates(sorted(known.vars()), 2):
                system = build_system(tpl, loop, init)
                for val in solve_system(system):
                    try:
                        inst = instantiate(tpl.form, val.assignment)
                    except Exception:
                        continue
                    if equal(inst, known):
                        found = True
                        break
                if found:
                    break
            assert found, name


class TestUserTemplates:
    def test_linked_parameters(self):
        tpl = parse_template(
            "template: (a*X + b*X^2)/(d - e*X^2)\na = 2*f\nb = f\nd = 2*f\ne = f\n",
            ["x"])
        assert tpl.parameters == ("f",)

    def test_pinned_constants(self):
        tpl = parse_template("(a*X + 1)/(1 - b*C)\na = 2\n", ["x", "c"])
        assert tpl.parameters == ("b",)
        inst = instantiate(tpl.form, {"b": F(1, 2)})
        assert equal(inst, normalize(2 * X + ONE, ONE - C * F(1, 2)))


class TestSmtLib:
    def test_export_shape(self):
        system = PolySystem((Polynomial.var("$a") * Polynomial.var("$b") - 2,
                             Polynomial.var("$a") + F(1, 2)), ("a", "b"))
        text = export_smtlib(system)
        assert "(set-logic QF_NRA)" in text
        assert "(declare-const a Real)" in text
        assert "(declare-const b Real)" in text
        assert text.count("(assert (= ") == 2
        assert "(check-sat)" in text and "(get-model)" in text

    def test_model_import(self):
        model = """
        sat
        (model
          (define-fun a () Real (- (/ 1 2)))
          (define-fun b () Real (- 4.0))
        )
        """
        val = import_smt_model(model, ["a", "b", "missing"])
        assert val.assignment["a"] == F(-1, 2)
        assert val.assignment["b"] == F(-4)
        assert val.assignment["missing"] == 0
        assert val.free == ("missing",)


class TestAnalyzeProgram:
    def test_sequential_pipeline_reports_positivity_failure(self, corpus):
        ast, init, expected, _ = corpus["sequential_loops"]
        analysis = analyze_program(ast, init, SynthesisConfig(max_den_degree=2))
        assert analysis.failure is not None
        assert analysis.failure.stage == "positivity"
        paper_form = normalize(2 * C, C * C - 3 * C + 2) + from_poly(ONE)
        assert equal(analysis.failure.candidate, paper_form)
        loops = [s for s in analysis.segments if s.kind == "loop"]
        assert loops[0].outcome.kind == CertificateKind.EXACT_POSTERIOR

    def test_nested_loops_rejected(self):
        ast = parse("nat x;\nwhile (x > 0) { while (x > 1) { x := x - 1 }; x := x - 1 }")
        analysis = analyze_program(ast, G_X, SynthesisConfig())
        assert analysis.failure is not None and analysis.failure.stage == "structure"
