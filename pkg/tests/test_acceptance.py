"""Acceptance criteria 1-8, one test each; every test prints a PASS/FAIL line."""
from __future__ import annotations

import random
import time
from fractions import Fraction

import pytest

from oracles import (perturb, rooted_branching_bisimilar, split_state, step_bisimilar,
                     world_distribution)
from pptc.abp import run_abp
from pptc.aip import aip_equal
from pptc.axioms import run_suite
from pptc.dataenv import weakest_precondition
from pptc.equivalence import (prob_hhp_bisim, prob_hp_bisim, prob_pomset_bisim,
                              prob_rooted_branching_step_bisim, prob_step_bisim)
from pptc.hoare import (ProofNode, check_derivation, check_triple_by_equivalence,
                        check_triple_semantic, random_derivation)
from pptc.parser import HoareTriple, SpecFile, pretty_print
from pptc.random_terms import (ALL_OPS, PAR_OPS, TermShape, random_env, random_guard,
                               random_linear_spec, random_plts, random_term, mutate_spec,
                               rename_spec)
from pptc.rewriter import is_basic_term, normalize
from pptc.semantics import Semantics, build_plts
from pptc.terms import AlgebraDecl, Atom, GuardAtom, RecSpec, RecVar, SeqG, WpG

ALPHABET = ("a", "b", "c", "d")
ALGEBRA = AlgebraDecl.build(events=ALPHABET, comm={("a", "b"): "c"}, conflicts=[("a", "d")],
                            order=[("d", "a")])


@pytest.fixture
def verdict(capsys):
    def say(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return say


def test_criterion_1_axiom_soundness(verdict):
    t0 = time.perf_counter()
    rep = run_suite(seed=0, count=50)
    secs = time.perf_counter() - t0
    failed = [f"{r.name} ({r.failed}/{r.checked})" for r in rep.failures()]
    ok = not failed and secs < 300
    verdict(1, ok, f"{len(rep.results) - len(failed)}/{len(rep.results)} axioms hold on 50 instances "
                   f"in {secs:.1f}s" + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok, "\n".join(line for line in rep.text().splitlines() if not line.startswith("pass"))


def test_criterion_2_elimination(verdict):
    rng = random.Random(0)
    shape = TermShape(ops=ALL_OPS + ("hide",), tau=True)
    t0 = time.perf_counter()
    bad = []
    for _ in range(1000):
        t = random_term(rng, rng.randint(1, 12), shape)
        nf, _ = normalize(t, ALGEBRA, record=False)
        if not is_basic_term(nf) or not prob_step_bisim(build_plts(t, ALGEBRA), build_plts(nf, ALGEBRA)):
            bad.append(pretty_print(t))
    secs = time.perf_counter() - t0
    ok = not bad and secs < 120
    verdict(2, ok, f"{1000 - len(bad)}/1000 terms normalize to bisimilar basic terms in {secs:.1f}s")
    assert ok, bad[:5]


def test_criterion_3_distributions(verdict):
    rng = random.Random(3)
    sem = Semantics(ALGEBRA)
    resolved_shape = TermShape(ops=PAR_OPS + ("encap", "hide"), tau=True, eps=True)
    mismatches, systems, bad_sums, seen = 0, 0, 0, []
    for _ in range(1000):
        t = random_term(rng, rng.randint(1, 8), resolved_shape)
        want = world_distribution(t, sem)
        got = {r: w for w, r in sem.resolve(t)}
        if got != want or any(sem.mu(t, r) != w for r, w in want.items()):
            mismatches += 1
        # resolved terms of other inputs outside the support must get weight zero
        mismatches += sum(1 for r in seen[-25:] if r not in want and sem.mu(t, r) != 0)
        seen.extend(want)
    full_shape = TermShape(ops=ALL_OPS + ("hide",), tau=True)
    for _ in range(500):
        lts = build_plts(random_term(rng, rng.randint(1, 12), full_shape), ALGEBRA)
        systems += 1
        bad_sums += not lts.check_distributions()
    for loss in (Fraction(1, 3), Fraction(1, 2)):
        for lts in _abp_systems(loss):
            systems += 1
            bad_sums += not lts.check_distributions()
    ok = mismatches == 0 and bad_sums == 0
    verdict(3, ok, f"{mismatches} resolution mismatches on 1000 terms of size <= 8; "
                   f"{bad_sums}/{systems} systems with a weight sum other than 1")
    assert ok


def _abp_systems(loss):
    from pptc.abp import load
    spec = load(loss)
    return [build_plts(spec.root, spec.algebra, spec.recspec), build_plts(RecVar("Buff"), spec.algebra, spec.recspec)]


def test_criterion_4_checker_vs_oracle(verdict):
    rng = random.Random(4)
    labels = (("a",), ("b",), ("a", "b"))
    step_dis, step_eq = 0, 0
    for k in range(200):
        p = random_plts(rng, rng.randint(2, 7), labels)
        q = split_state(rng, p) if k % 2 else random_plts(rng, rng.randint(2, 8), labels)
        if k % 4 == 1:
            q = perturb(rng, q, labels)
        want = step_bisimilar(p, q)
        step_eq += want
        step_dis += prob_step_bisim(p, q).equivalent != want
    br_dis, br_eq = 0, 0
    labels_tau = labels + (("tau",),)
    for k in range(100):
        p = random_plts(rng, rng.randint(2, 5), labels, tau=True)
        q = split_state(rng, p) if k % 2 else random_plts(rng, rng.randint(2, 6), labels, tau=True)
        if k % 4 == 1:
            q = perturb(rng, q, labels_tau)
        want = rooted_branching_bisimilar(p, q)
        br_eq += want
        br_dis += prob_rooted_branching_step_bisim(p, q).equivalent != want
    ok = step_dis == 0 and br_dis == 0
    verdict(4, ok, f"step: {step_dis} disagreements on 200 pairs ({step_eq} equivalent); "
                   f"rooted branching: {br_dis} on 100 pairs ({br_eq} equivalent)")
    assert ok


def test_criterion_5_implication_chain(verdict):
    rng = random.Random(5)
    shape = TermShape(alphabet=("a", "b", "c"), ops=("seq", "alt", "prob", "par", "whole", "lmerge"))
    violations, counts = [], {"hhp": 0, "hp": 0, "pomset": 0, "step": 0}
    for k in range(100):
        t1 = random_term(rng, rng.randint(1, 11), shape)
        if k % 3 == 0:
            t2 = normalize(t1)[0]
        elif k % 3 == 1:
            t2 = random_term(rng, rng.randint(1, 11), shape)
        else:
            t2 = random_term(random.Random(k), rng.randint(1, 11), shape)
        p, q = build_plts(t1), build_plts(t2)
        v = {"hhp": prob_hhp_bisim(p, q).equivalent, "hp": prob_hp_bisim(p, q).equivalent,
             "pomset": prob_pomset_bisim(p, q).equivalent, "step": prob_step_bisim(p, q).equivalent}
        for key, val in v.items():
            counts[key] += val
        chain = ["hhp", "hp", "pomset", "step"]
        for a, b in zip(chain, chain[1:]):
            if v[a] and not v[b]:
                violations.append((a, b, pretty_print(t1), pretty_print(t2)))
    ok = not violations
    verdict(5, ok, f"{len(violations)} violations on 100 pairs; equivalent counts {counts}")
    assert ok, violations[:3]


def test_criterion_6_aip(verdict):
    rng = random.Random(6)
    t0 = time.perf_counter()
    equal_ok = unequal_ok = 0
    for _ in range(50):
        spec = random_linear_spec(rng, rng.randint(1, 4))
        renamed, names = rename_spec(spec, "R")
        v = aip_equal(RecVar("X0"), RecVar(names["X0"]), RecSpec(spec.equations + renamed.equations), 5)
        equal_ok += v.equal
    for _ in range(50):
        spec = random_linear_spec(rng, rng.randint(1, 4))
        renamed, names = rename_spec(spec, "R")
        mutated, _ = mutate_spec(rng, renamed, names["X0"])
        v = aip_equal(RecVar("X0"), RecVar(names["X0"]), RecSpec(spec.equations + mutated.equations), 5)
        unequal_ok += v.first_difference is not None
    secs = time.perf_counter() - t0
    ok = equal_ok == 50 and unequal_ok == 50 and secs < 120
    verdict(6, ok, f"{equal_ok}/50 renamed pairs agree up to n=5, {unequal_ok}/50 mutated pairs "
                   f"separated, {secs:.1f}s")
    assert ok


def test_criterion_7_hoare(verdict):
    rng = random.Random(7)
    atoms = ["phi", "psi"]
    alg = AlgebraDecl.build(ALPHABET, comm={("a", "b"): "c"}, conflicts=[("a", "d")],
                            prob_conflicts=[("b", "c")])
    instance_failures = 0
    for _ in range(100):
        env = random_env(rng, rng.randint(3, 5), atoms, list(ALPHABET), deterministic=rng.random() < 0.5)
        sf = SpecFile(alg, RecSpec(), env)
        for e in ALPHABET:
            post = random_guard(rng, atoms, rng.randint(1, 3))
            for pre in (WpG(e, post), weakest_precondition(e, post, env)):
                tr = HoareTriple(pre, Atom(e), post)
                node = ProofNode("H1", tr)
                instance_failures += not (check_triple_semantic(tr, sf) and check_derivation(node, sf)
                                          and check_triple_by_equivalence(tr, sf))
        alpha, phi = random_guard(rng, atoms, 2), random_guard(rng, atoms, 2)
        tr = HoareTriple(alpha, GuardAtom(phi), SeqG(alpha, phi))
        instance_failures += not (check_triple_semantic(tr, sf) and check_derivation(ProofNode("H2", tr), sf))
    unsound = []
    for k in range(100):
        env = random_env(rng, rng.randint(3, 5), atoms, list(ALPHABET), deterministic=rng.random() < 0.5)
        node, sf = random_derivation(rng, SpecFile(alg, RecSpec(), env), depth=3)
        assert check_derivation(node, sf)
        if not check_triple_semantic(node.conclusion, sf):
            unsound.append((k, sorted(node.rules_used())))
    ok = instance_failures == 0 and not unsound
    verdict(7, ok, f"{instance_failures} failing H1/H2 instances in 100 environments; "
                   f"{len(unsound)}/100 accepted derivations semantically invalid"
                   + (f" (rules involved: {unsound})" if unsound else ""))
    assert ok


def test_criterion_8_abp(verdict):
    lines, ok = [], True
    for loss in (Fraction(1, 3), Fraction(1, 2)):
        t0 = time.perf_counter()
        rep = run_abp(loss, capacity=1)
        secs = time.perf_counter() - t0
        good = (rep.traces_equal and rep.buff_matches_oracle and rep.states_ab <= 2000 and secs < 60
                and rep.observable_alphabet == ["acceptR", "acceptS", "deliverR", "deliverS"])
        ok &= good
        lines.append(f"loss {rep.loss}: traces {'equal' if rep.traces_equal else 'differ'}, "
                     f"{rep.states_ab} states, {secs:.1f}s, branching bisimilar {rep.prbs_equivalent}")
    verdict(8, ok, "; ".join(lines))
    assert ok
