import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import world_distribution
from pptc.config import Limits
from pptc.parser import parse_spec_file, parse_term
from pptc.random_terms import ALL_OPS, PAR_OPS, TermShape, random_term
from pptc.semantics import (MissingDataEnv, Semantics, StateCapExceeded, StepTooLarge, UnguardedRecursion,
                            action_steps, build_plts, mu, resolve)
from pptc.terms import AlgebraDecl, Atom, Breve, Comm, Encap, Hide, Par, RecSpec, RecVar, Resolved, Alt

ALG = AlgebraDecl.build(["a", "b", "c", "d"], comm={("a", "b"): "c"}, conflicts=[("a", "d")],
                        prob_conflicts=[("b", "c")], order=[("d", "a")])
br = lambda e: Breve(Atom(e))


class TestMu:
    def test_examples(self):
        assert mu(Atom("a"), br("a")) == 1
        assert mu(parse_term("a +[1/3] b"), br("a")) == Fraction(1, 3)
        assert mu(parse_term("a + b"), Alt(br("a"), br("b"))) == 1
        assert mu(Atom("a"), br("b")) == 0

    def test_resolve_examples(self):
        assert resolve(parse_term("a +[1/2] b")) == [(Fraction(1, 2), br("a")), (Fraction(1, 2), br("b"))]
        assert resolve(Atom("a")) == [(1, br("a"))]
        assert sorted(resolve(parse_term("(a +[1/2] b) + c")), key=repr) == sorted(
            [(Fraction(1, 2), Alt(br("a"), br("c"))), (Fraction(1, 2), Alt(br("b"), br("c")))], key=repr)

    @settings(max_examples=200)
    @given(st.integers(0, 10**9), st.integers(1, 8))
    def test_resolve_matches_choice_enumeration(self, seed, n):
        sem = Semantics(ALG)
        t = random_term(random.Random(seed), n, TermShape(ops=PAR_OPS + ("encap", "hide"), tau=True, eps=True))
        assert {r: w for w, r in sem.resolve(t)} == world_distribution(t, sem)

    def test_unguarded(self):
        spec = RecSpec((("X", RecVar("X")),))
        with pytest.raises(UnguardedRecursion):
            resolve(RecVar("X"), spec=spec)


class TestSteps:
    def test_parallel_is_synchronous(self):
        assert action_steps(Par(br("a"), br("b"))) == [(("a", "b"), None, None)]

    def test_race_adds_interleavings(self):
        alg = AlgebraDecl.build(["a", "b"], races=[("a", "b")])
        labels = sorted(lab for lab, _, _ in action_steps(Par(br("a"), br("b")), alg))
        assert labels == [("a",), ("a", "b"), ("b",)]
        steps = {lab: res for lab, res, _ in action_steps(Par(br("a"), br("b")), alg)}
        assert steps[("a",)] == Resolved(br("b"))

    def test_communication(self):
        alg = AlgebraDecl.build(["a", "b", "c"], comm={("a", "b"): "c"})
        assert action_steps(Comm(br("a"), br("b")), alg) == [(("c",), None, None)]

    def test_encapsulation_blocks(self):
        assert action_steps(Encap(frozenset({"a"}), br("a"))) == []

    def test_hiding(self):
        assert action_steps(Hide(frozenset({"a"}), br("a"))) == [(("tau",), None, None)]

    def test_guard_needs_environment(self):
        with pytest.raises(MissingDataEnv):
            build_plts(parse_term("[phi] . a"))

    @settings(max_examples=100)
    @given(st.integers(0, 10**9), st.integers(1, 12))
    def test_steps_respect_concurrency(self, seed, n):
        t = random_term(random.Random(seed), n, TermShape(ops=ALL_OPS, tau=True))
        lts = build_plts(t, ALG)
        for lab in lts.labels():
            for i, x in enumerate(lab):
                for y in lab[i + 1:]:
                    assert ALG.concurrent(x, y)

    @settings(max_examples=100)
    @given(st.integers(0, 10**9), st.integers(1, 10))
    def test_encapsulated_events_never_fire(self, seed, n):
        t = Encap(frozenset({"a", "b"}), random_term(random.Random(seed), n, TermShape(ops=PAR_OPS)))
        for lab in build_plts(t, ALG).labels():
            assert not {"a", "b"} & set(lab)


class TestBuild:
    def test_prob_choice(self):
        lts = build_plts(parse_term("a +[1/2] b"))
        kinds = [s.kind for s in lts.states]
        assert kinds.count("prob") == 2 and kinds.count("resolved") == 2 and kinds.count("terminated") == 1
        assert len(lts.states) == 5
        assert sorted(lab for lab, _ in sum(lts.act_edges.values(), [])) == [("a",), ("b",)]

    def test_deadlock(self):
        lts = build_plts(parse_term("delta"))
        assert lts.kind(lts.root) == "prob"
        (resolved,) = [j for _, j in lts.prob_edges[lts.root]]
        assert lts.act_edges[resolved] == []

    def test_recursion_cycle(self):
        sf = parse_spec_file("eq X = a . X; root X;")
        lts = build_plts(sf.root, sf.algebra, sf.recspec)
        assert [s.kind for s in lts.states] == ["prob", "resolved"]
        assert lts.act_edges[1] == [(("a",), 0)]
        assert not lts.is_acyclic()

    def test_state_cap(self):
        sf = parse_spec_file("eq X = a . X . b; root X;")
        with pytest.raises(StateCapExceeded):
            build_plts(sf.root, sf.algebra, sf.recspec, limits=Limits(max_states=30))

    def test_step_size_cap(self):
        sf = parse_spec_file("eq X = a . (X || X); root X;")
        with pytest.raises(StepTooLarge):
            build_plts(sf.root, sf.algebra, sf.recspec, limits=Limits(max_events=16))

    @settings(max_examples=100)
    @given(st.integers(0, 10**9), st.integers(1, 12))
    def test_distribution_law_and_determinism(self, seed, n):
        t = random_term(random.Random(seed), n, TermShape(ops=ALL_OPS + ("hide",), tau=True))
        one, two = build_plts(t, ALG), build_plts(t, ALG)
        assert one.check_distributions()
        assert one.export() == two.export()

    def test_guards_follow_data(self):
        sf = parse_spec_file("""
            state s0, s1;
            test phi @ s0 = true; test phi @ s1 = false;
            effect a @ s0 = {s1}; effect a @ s1 = {s1};
            effect b @ s0 = {s0}; effect b @ s1 = {s0};
            root a . ([phi] . b + [!phi] . a);
        """)
        lts = build_plts(sf.root, sf.algebra, sf.recspec, sf.data_env)
        labels = [lab for edges in lts.act_edges.values() for lab, _ in edges]
        assert labels.count(("a",)) == 2 and ("b",) not in labels
