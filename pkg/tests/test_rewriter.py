import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pptc.config import Limits
from pptc.equivalence import prob_step_bisim
from pptc.parser import parse_spec_file, parse_term, pretty_print
from pptc.random_terms import ALL_OPS, TermShape, random_term
from pptc.rewriter import (NotClosed, Rewriter, StepLimitExceeded, audit_trace, is_basic_term,
                           leaf_distribution, normalize, project_rewrite)
from pptc.semantics import build_plts
from pptc.terms import DELTA, AlgebraDecl, Atom, RecVar

ALG = AlgebraDecl.build(["a", "b", "c", "d"], comm={("a", "b"): "c"}, conflicts=[("a", "d")],
                        order=[("d", "a")])
SHAPE = TermShape(ops=ALL_OPS + ("hide",), tau=True)


def nf(src, alg=ALG):
    return normalize(parse_term(src), alg)[0]


class TestExamples:
    def test_right_distribution(self):
        assert nf("(a + b) . c") == parse_term("a . c + b . c")

    def test_prob_idempotence(self):
        assert nf("a +[1/2] a") == Atom("a")

    def test_prob_reassociation_keeps_weights(self):
        out = nf("(a +[1/3] b) +[1/2] c")
        want = {Atom("a"): Fraction(1, 6), Atom("b"): Fraction(1, 3), Atom("c"): Fraction(1, 2)}
        assert leaf_distribution(out) == want

    def test_deadlock_absorbs(self):
        assert nf("delta . a") == DELTA

    def test_contradictory_guards(self):
        assert nf("[phi] . [!phi] . a") == DELTA

    def test_parallel_becomes_step(self):
        out = nf("a || b")
        assert is_basic_term(out)
        assert prob_step_bisim(build_plts(out), build_plts(parse_term("a || b")))

    def test_basic_term_recognition(self):
        assert is_basic_term(parse_term("a . b + c"))
        assert is_basic_term(parse_term("a +[1/2] b . c"))
        assert not is_basic_term(parse_term("a || b"))
        assert not is_basic_term(parse_term("encap{a}(a)"))

    def test_open_term_rejected(self):
        with pytest.raises(NotClosed):
            normalize(RecVar("X"))

    def test_step_limit(self):
        t = parse_term("(a + b) . (a + b) . (a + b) . (a + b) . (a + b) . (a + b)")
        with pytest.raises(StepLimitExceeded):
            normalize(t, limits=Limits(step_limit=5))


class TestProjection:
    SPEC = parse_spec_file("eq X = a . b . X; root X;")

    def project(self, n):
        return project_rewrite(self.SPEC.root, n, self.SPEC.algebra, self.SPEC.recspec)

    def test_depths(self):
        assert self.project(1) == parse_term("a . delta")
        assert self.project(2) == parse_term("a . (b . delta)")
        assert self.project(3) == parse_term("a . (b . (a . delta))")

    def test_prob_choice_is_not_a_step(self):
        sf = parse_spec_file("root (a +[1/3] b) . c;")
        out = project_rewrite(sf.root, 1, sf.algebra, sf.recspec)
        assert out == parse_term("a . delta +[1/3] b . delta")


class TestTraces:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**9), st.integers(1, 10))
    def test_replay_and_audit(self, seed, n):
        t = random_term(random.Random(seed), n, SHAPE)
        rw = Rewriter(ALG)
        out, trace = rw.normalize(t)
        assert trace.replay(t) == out
        assert audit_trace(trace, rw) == []

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**9), st.integers(1, 10))
    def test_normal_form_is_basic_and_bisimilar(self, seed, n):
        t = random_term(random.Random(seed), n, SHAPE)
        out, _ = normalize(t, ALG, record=False)
        assert is_basic_term(out)
        assert prob_step_bisim(build_plts(t, ALG), build_plts(out, ALG))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**9), st.integers(1, 10))
    def test_idempotent(self, seed, n):
        out, _ = normalize(random_term(random.Random(seed), n, SHAPE), ALG)
        assert normalize(out, ALG)[0] == out

    def test_trace_names_rules(self):
        _, trace = normalize(parse_term("(a + b) . c"))
        assert trace.rules_used()
        assert "==>" in trace.export()
        assert pretty_print(trace.steps[-1].after) == "a . c + b . c"
