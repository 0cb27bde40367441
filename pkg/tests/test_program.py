import random
from fractions import Fraction as F

import pytest

from gfinv import program as P
from gfinv.oracle import SparseMeasure, kleene_iterate, exec_loopfree
from gfinv.program import (
    Bernoulli,
    Choice,
    Dirac,
    InvalidProbability,
    ProgramError,
    Seq,
    Skip,
    SyntaxError_,
    UndeclaredVariable,
    While,
    classify,
    desugar,
    parse,
    print_program,
)

GEOMETRIC = "nat x; nat c;\nwhile (x = 1) { { c := c + 1 } [1/2] { x := 0 } }"

FDR = """
nat v; nat c; nat f;
while (f = 0) {
    v := 2*v;
    { c := 2*c } [1/2] { c := 2*c + 1 };
    if (v >= 6) {
        if (c < 6) { f := f + 1 }
        else { v := v - 6; c := c - 6 }
    }
}
"""


class TestParse:
    def test_geometric_shape(self):
        ast = parse(GEOMETRIC)
        assert ast.variables == ("x", "c")
        loop = ast.body
        assert isinstance(loop, While)
        assert loop.guard == P.Eq("x", 1)
        body = loop.body
        assert isinstance(body, Choice) and body.prob == F(1, 2)
        assert body.left == P.IidIncrement("c", Dirac(1), None)
        assert body.right == P.AssignConst("x", 0)

    def test_skip(self):
        assert parse("skip").body == Skip()

    def test_fdr_doubling_desugared(self):
        ast = parse(FDR)
        stmts = ast.body.body.stmts
        assert stmts[0] == P.IidIncrement("v", Dirac(1), "v")

    def test_undeclared_variable(self):
        with pytest.raises(UndeclaredVariable):
            parse("nat x;\ny := 2")

    def test_invalid_probability(self):
        with pytest.raises(InvalidProbability):
            parse("nat x;\n{ x := 1 } [3/2] { skip }")

    def test_syntax_error_carries_position(self):
        with pytest.raises(SyntaxError_) as exc:
            parse("nat x;\nwhile (x < ) { skip }")
        assert exc.value.line == 2

    def test_distribution_statements(self):
        ast = parse("nat x; nat y;\nx := geometric(1/2);\n"
                    "y += iid(bernoulli(1/3), x);\n"
                    "x += iid(uniform(1, 3), 1);\n"
                    "x := pgf(1/2 + 1/2*T)")
        kinds = [type(s).__name__ for s in ast.body.stmts]
        assert kinds == ["SampleAssign", "IidIncrement", "IidIncrement", "SampleAssign"]

    def test_bad_pgf_mass_rejected(self):
        with pytest.raises(InvalidProbability):
            parse("nat x;\nx := pgf(1/2 + 1/4*T)")


class TestDesugarAssignments:
    def test_linear_combination(self):
        ast = parse("nat x; nat y;\nx := x + 2*y + 1")
        assert ast.body == Seq((P.IidIncrement("x", Dirac(2), "y"),
                                P.IidIncrement("x", Dirac(1), None)))

    def test_doubling(self):
        assert parse("nat v;\nv := 2*v").body == P.IidIncrement("v", Dirac(1), "v")

    def test_self_assign_is_skip(self):
        assert parse("nat x;\nx := x").body == Skip()

    def test_constant_subtraction_becomes_decrements(self):
        ast = parse("nat x;\nx := x - 2")
        assert ast.body == Seq((P.Decrement("x"), P.Decrement("x")))


class TestClassify:
    def test_geometric_flags(self):
        c = classify(parse(GEOMETRIC))
        assert c.is_single_loop
        assert c.is_redip
        # the body contains x := 0, so it is not strictly closed
        assert not c.is_clredip
        assert c.is_clredip_with_assignments

    def test_diverge_not_redip(self):
        c = classify(parse("diverge"))
        assert not c.is_redip

    def test_nested_not_single(self):
        c = classify(parse("nat x;\nwhile (x < 1) { while (x < 2) { skip } }"))
        assert not c.is_single_loop

    def test_monotone_implications(self, corpus):
        for name, (ast, _, _, _) in corpus.items():
            c = classify(ast)
            if c.is_clredip:
                assert c.is_clredip_with_assignments
            if c.is_clredip_with_assignments:
                assert c.is_redip


class TestPrintRoundTrip:
    def test_corpus_round_trips(self, corpus):
        for name, (ast, _, _, _) in corpus.items():
            assert parse(print_program(ast)) == ast, name

    def test_guard_round_trips(self):
        src = ("nat x; nat y;\n"
               "while ((x = 1 mod 3) && (!(y > 2) || x != 5)) { x := x + 3 }")
        ast = parse(src)
        assert parse(print_program(ast)) == ast


def _random_measure(rng, nvars, support=6):
    entries = {}
    for _ in range(support):
        state = tuple(rng.randrange(4) for _ in range(nvars))
        entries[state] = entries.get(state, F(0)) + F(1, rng.randrange(1, 5))
    return SparseMeasure(entries)


class TestDesugarSemantics:
    def test_desugar_preserves_oracle_semantics(self, corpus):
        rng = random.Random(7)
        for name, (ast, _, _, _) in corpus.items():
            sweet = ast
            sour = desugar(ast)
            segs = zip(_segments(sweet), _segments(sour))
            for a, b in segs:
                for _ in range(3):
                    m = _random_measure(rng, len(ast.variables))
                    if isinstance(a, While):
                        ra = kleene_iterate(a, m, ast.variables, 5, support_cap=24)
                        rb = kleene_iterate(b, m, ast.variables, 5, support_cap=24)
                        assert ra.occ_lower.entries == rb.occ_lower.entries, name
                        assert ra.post_lower.entries == rb.post_lower.entries, name
                        assert ra.residual == rb.residual, name
                    else:
                        ea = exec_loopfree(a, m, ast.variables, support_cap=24)
                        eb = exec_loopfree(b, m, ast.variables, support_cap=24)
                        assert ea.entries == eb.entries, name


def _segments(ast):
    from gfinv.program import top_level_segments
    return top_level_segments(ast)
