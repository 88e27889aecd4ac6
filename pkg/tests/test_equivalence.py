import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import step_bisimilar
from pptc.equivalence import (RELATIONS, check, prob_branching_step_bisim,
                              prob_rooted_branching_step_bisim, prob_step_bisim,
                              validate_branching_witness, validate_step_witness)
from pptc.parser import parse_term
from pptc.random_terms import ALL_OPS, TermShape, random_plts, random_term
from pptc.semantics import build_plts

SHAPE = TermShape(ops=ALL_OPS + ("hide",), tau=True)
LABELS = (("a",), ("b",), ("a", "b"))


def sys_(src):
    return build_plts(parse_term(src))


def verdicts(x, y):
    p, q = sys_(x), sys_(y)
    return {r: check(p, q, r).equivalent for r in RELATIONS}


class TestExamples:
    def test_commutative_choice(self):
        assert all(verdicts("a + b", "b + a").values())

    def test_complementary_weights(self):
        assert all(verdicts("a +[3/10] b", "b +[7/10] a").values())

    def test_weights_matter(self):
        assert not any(verdicts("a +[1/2] b", "a +[1/3] b").values())

    def test_concurrency_is_not_interleaving(self):
        assert not any(verdicts("a || b", "a . b + b . a").values())

    def test_choice_timing(self):
        assert not any(verdicts("a . b + a . c", "a . (b + c)").values())

    def test_hidden_internal_action(self):
        v = verdicts("hide{i}(a . i . b)", "a . b")
        assert v["prbstep"] and v["pbstep"] and not v["pstep"]

    def test_rootedness(self):
        v = verdicts("tau . a", "a")
        assert v["pbstep"] and not v["prbstep"]

    def test_inert_tau_under_prefix(self):
        v = verdicts("a . (tau . (b + c) + b)", "a . (b + c)")
        assert v["prbstep"]

    def test_unknown_relation(self):
        with pytest.raises(ValueError):
            check(sys_("a"), sys_("a"), "trace")

    def test_report_names_observation(self):
        v = check(sys_("a . b + a . c"), sys_("a . (b + c)"))
        assert "not equivalent" in v.report() and v.observation
        assert '"equivalent": false' in v.to_json()


class TestWitnesses:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9), st.integers(1, 10))
    def test_self_comparison_has_valid_witness(self, seed, n):
        rng = random.Random(seed)
        t = random_term(rng, n, SHAPE)
        p = build_plts(t)
        v = prob_step_bisim(p, p)
        assert v.equivalent and validate_step_witness(p, p, v.witness)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_step_witness_valid_iff_equivalent(self, seed):
        rng = random.Random(seed)
        p, q = random_plts(rng, rng.randint(2, 6), LABELS), random_plts(rng, rng.randint(2, 6), LABELS)
        v = prob_step_bisim(p, q)
        assert v.equivalent == step_bisimilar(p, q)
        if v.equivalent:
            assert validate_step_witness(p, q, v.witness)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_branching_witness(self, seed):
        rng = random.Random(seed)
        p = random_plts(rng, rng.randint(2, 5), LABELS, tau=True)
        q = random_plts(rng, rng.randint(2, 5), LABELS, tau=True)
        for rooted, fn in ((True, prob_rooted_branching_step_bisim), (False, prob_branching_step_bisim)):
            v = fn(p, q)
            if v.equivalent:
                assert validate_branching_witness(p, q, v.witness, rooted=rooted)

    def test_corrupted_witness_rejected(self):
        p, q = sys_("a . b"), sys_("a . c")
        assert not validate_step_witness(p, q, frozenset((i, i) for i in range(p.n_states)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.integers(1, 8), st.integers(1, 8))
def test_symmetric_and_reflexive(seed, n1, n2):
    rng = random.Random(seed)
    p, q = build_plts(random_term(rng, n1, SHAPE)), build_plts(random_term(rng, n2, SHAPE))
    for rel in ("pstep", "prbstep", "pbstep"):
        assert check(p, p, rel).equivalent
        assert check(p, q, rel).equivalent == check(q, p, rel).equivalent
