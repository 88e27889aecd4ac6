import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pptc.dataenv import DataEnv, eval_guard, guard_equivalent, satisfying, weakest_precondition
from pptc.hoare import (ProofSyntaxError, RuleMismatch, SideConditionFails, check_derivation,
                        check_sufficient_determinism, check_triple_by_equivalence,
                        check_triple_semantic, format_proof, parse_proof, random_derivation,
                        triple_counterexample)
from pptc.parser import parse_guard, parse_spec_file
from pptc.random_terms import random_env, random_guard
from pptc.terms import DELTA, EPS, AlgebraDecl, GuardAtom, RecSpec

SRC = """
state s0, s1, s2;
test phi @ s0 = true;
test psi @ s1 = true; test psi @ s2 = true;
effect a @ s0 = {s1}; effect a @ s1 = {s2}; effect a @ s2 = {s2};
effect b @ s0 = {s0}; effect b @ s1 = {s0}; effect b @ s2 = {s0};
"""
SPEC = parse_spec_file(SRC + "root a;")
ENV = SPEC.data_env
G = parse_guard


def spec_with(extra):
    return parse_spec_file(SRC + extra)


class TestGuards:
    def test_eval(self):
        assert eval_guard(G("phi"), "s0", ENV) and not eval_guard(G("phi"), "s1", ENV)
        assert eval_guard(G("!phi . psi"), "s1", ENV)
        assert satisfying(G("phi + psi"), ENV) == {"s0", "s1", "s2"}

    def test_wp_examples(self):
        # a leads into a psi-state from every state
        assert satisfying(weakest_precondition("a", G("psi"), ENV), ENV) == {"s0", "s1", "s2"}
        assert satisfying(weakest_precondition("b", G("psi"), ENV), ENV) == set()
        assert satisfying(weakest_precondition("a", G("!phi . !psi"), ENV), ENV) == set()

    @settings(max_examples=100)
    @given(st.integers(0, 10**9))
    def test_wp_is_weakest(self, seed):
        rng = random.Random(seed)
        env = random_env(rng, rng.randint(2, 5), ["phi", "psi"], ["a", "b"])
        post = random_guard(rng, ["phi", "psi"], rng.randint(1, 3))
        wp = weakest_precondition("a", post, env)
        for s in env.states:
            ok = all(eval_guard(post, t, env) for t in env.effect("a", s))
            assert eval_guard(wp, s, env) == ok

    def test_guard_laws_in_environment(self):
        # a guard and its negation: choice is always true, sequence never
        for g in ("phi", "psi", "phi . psi"):
            assert guard_equivalent(G(f"{g} + !({g})"), G("eps"), ENV)
            assert guard_equivalent(G(f"{g} . !({g})"), G("delta"), ENV)


class TestTriples:
    def test_hold_and_fail(self):
        sf = spec_with("hoare {phi} a {psi}; hoare {phi} b {psi};")
        good, bad = sf.triples
        assert check_triple_semantic(good, sf) and triple_counterexample(good, sf) is None
        assert not check_triple_semantic(bad, sf)
        assert triple_counterexample(bad, sf)[0] == "s0"

    def test_equivalence_reading_agrees(self):
        sf = spec_with("hoare {phi} a {psi}; hoare {phi} b {psi}; hoare {psi} a . a {psi};")
        for tr in sf.triples:
            assert check_triple_by_equivalence(tr, sf) == check_triple_semantic(tr, sf)

    def test_guard_program(self):
        sf = spec_with("hoare {psi} [phi] . a {delta};")
        assert check_triple_semantic(sf.triples[0], sf)


class TestDeterminism:
    def test_unguarded_choice_flagged(self):
        rep = check_sufficient_determinism(spec_with("root a + b;"))
        assert not rep.deterministic and "nondeterministic" in rep.text()

    def test_guarded_choice_accepted(self):
        assert check_sufficient_determinism(spec_with("root [phi] . a + [!phi] . b;")).deterministic

    def test_same_effect_accepted(self):
        assert check_sufficient_determinism(spec_with("root b . a + b . b;")).deterministic


class TestDerivations:
    def test_sequence_chain(self):
        sf = spec_with("")
        proof = parse_proof("""
            // two events in a row
            H4 {wp(a, wp(b, phi))} a . b {phi}
              H1 {wp(a, wp(b, phi))} a {wp(b, phi)}
              H1 {wp(b, phi)} b {phi}
        """, sf)
        assert check_derivation(proof, sf)
        assert proof.rules_used() == {"H1", "H4"}

    def test_broken_chain(self):
        sf = spec_with("")
        proof = parse_proof("""
            H4 {wp(a, psi)} a . b {phi}
              H1 {wp(a, psi)} a {psi}
              H1 {wp(b, phi)} b {phi}
        """, sf)
        with pytest.raises(RuleMismatch, match="chain"):
            check_derivation(proof, sf)

    def test_probabilistic_choice(self):
        sf = spec_with("")
        proof = parse_proof("""
            PH1 {phi} a +[1/3] b {eps}
              H9 {phi} a {eps}
                H1 {wp(a, eps)} a {eps}
              H9 {phi} b {eps}
                H1 {wp(b, eps)} b {eps}
        """, sf)
        assert check_derivation(proof, sf)
        swapped = parse_proof("""
            PH1 {phi} a +[1/3] b {eps}
              H9 {phi} b {eps}
                H1 {wp(b, eps)} b {eps}
              H9 {phi} a {eps}
                H1 {wp(a, eps)} a {eps}
        """, sf)
        with pytest.raises(RuleMismatch):
            check_derivation(swapped, sf)

    def test_choice_premises_must_share_conditions(self):
        sf = spec_with("")
        proof = parse_proof("""
            H3 {wp(a, psi)} a + b {psi}
              H1 {wp(a, psi)} a {psi}
              H1 {wp(b, phi)} b {phi}
        """, sf)
        with pytest.raises(RuleMismatch):
            check_derivation(proof, sf)

    def test_consequence_side_condition(self):
        sf = spec_with("")
        weaken = parse_proof("""
            H9 {phi} a {psi}
              H1 {wp(a, psi)} a {psi}
        """, sf)
        assert check_derivation(weaken, sf)
        wrong = parse_proof("""
            H9 {eps} b {psi}
              H1 {wp(b, psi)} b {psi}
        """, sf)
        with pytest.raises(SideConditionFails):
            check_derivation(wrong, sf)

    def test_syntax_errors(self):
        with pytest.raises(ProofSyntaxError):
            parse_proof("")
        with pytest.raises(ProofSyntaxError):
            parse_proof("H1 {phi a {psi}")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**9))
    def test_format_round_trip(self, seed):
        rng = random.Random(seed)
        alg = AlgebraDecl.build(["a", "b", "c"])
        env = random_env(rng, 3, ["phi", "psi"], ["a", "b", "c"])
        from pptc.parser import SpecFile
        node, sf = random_derivation(rng, SpecFile(alg, RecSpec(), env), depth=2)
        # parsing canonicalizes programs, so compare after one round
        once = parse_proof(format_proof(node), sf)
        assert format_proof(parse_proof(format_proof(once), sf)) == format_proof(once)
        assert check_derivation(once, sf)
