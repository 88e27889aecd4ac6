"""Reference implementations used only by the tests.

Each one follows the relevant definition directly and shares no algorithm
with the package code it checks.
"""
from __future__ import annotations

import random
from collections import defaultdict
from fractions import Fraction

from pptc.semantics import Plts, PState, Semantics, mk_alt, mk_seq
from pptc.terms import (
    Alt, Atom, Breve, Comm, Delta, EPS, Encap, Epsilon, Hide, LeftMerge, Par,
    ProbAlt, Seq, Tau, Whole,
)

TAU = "tau"


# ---------------------------------------------------------------------------
# resolution by enumerating every probabilistic choice

def worlds(t, sem: Semantics):
    """(weight, resolved term) for every left/right assignment of the term's
    probabilistic choices, one entry per assignment, no merging."""
    if isinstance(t, (Atom, Delta, Epsilon, Tau)):
        return [(Fraction(1), Breve(t))]
    if isinstance(t, ProbAlt):
        return ([(t.prob * w, r) for w, r in worlds(t.left, sem)]
                + [((1 - t.prob) * w, r) for w, r in worlds(t.right, sem)])
    if isinstance(t, Alt):
        return [(w1 * w2, mk_alt((a, b))) for w1, a in worlds(t.left, sem) for w2, b in worlds(t.right, sem)]
    if isinstance(t, Seq):
        out = []
        for w1, x1 in worlds(t.left, sem):
            if not sem.term_flag(x1):
                out.append((w1, mk_seq(x1, t.right)))
                continue
            live = bool(sem.steps(x1))
            for w2, z1 in worlds(t.right, sem):
                out.append((w1 * w2, mk_alt((mk_seq(x1, t.right), z1)) if live else z1))
        return out
    if isinstance(t, (Par, Whole, LeftMerge, Comm)):
        return [(w1 * w2, type(t)(a, b)) for w1, a in worlds(t.left, sem) for w2, b in worlds(t.right, sem)]
    if isinstance(t, (Encap, Hide)):
        return [(w, type(t)(t.events, a)) for w, a in worlds(t.arg, sem)]
    raise TypeError(f"oracle does not cover {type(t).__name__}")


def world_distribution(t, sem: Semantics) -> dict:
    dist = defaultdict(Fraction)
    for w, r in worlds(t, sem):
        dist[r] += w
    return {r: w for r, w in dist.items() if w}


# ---------------------------------------------------------------------------
# greatest fixpoints over state pairs

class Pair:
    """Two systems side by side, right states shifted by the left size."""

    def __init__(self, p: Plts, q: Plts):
        self.off = len(p.states)
        self.states = list(p.states) + list(q.states)
        self.prob = {}
        self.act = {}
        for base, s in ((0, p), (self.off, q)):
            for i in range(len(s.states)):
                self.prob[base + i] = [(w, base + j) for w, j in s.prob_edges.get(i, ())]
                self.act[base + i] = [(lab, base + j) for lab, j in s.act_edges.get(i, ())]
        self.roots = (p.root, self.off + q.root)
        self.n = len(self.states)

    def flag(self, i):
        st = self.states[i]
        return st.kind == "terminated" or st.can_terminate


def _components(n, rel):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x
    for a, b in rel:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return [find(i) for i in range(n)]


def _mass(edges, cls):
    acc = defaultdict(Fraction)
    for w, j in edges:
        acc[cls[j]] += w
    return dict(acc)


def largest_step_bisimulation(u: Pair) -> set:
    """Largest relation meeting the strong step transfer and class-weight conditions."""
    rel = {(s, t) for s in range(u.n) for t in range(u.n)
           if u.states[s].kind == u.states[t].kind and u.states[s].data == u.states[t].data
           and u.flag(s) == u.flag(t)}
    while True:
        cls = _components(u.n, rel)

        def transfer(s, t):
            for lab, s2 in u.act[s]:
                if not any(l2 == lab and (s2, t2) in rel for l2, t2 in u.act[t]):
                    return False
            return True

        keep = {(s, t) for s, t in rel
                if _mass(u.prob[s], cls) == _mass(u.prob[t], cls) and transfer(s, t) and transfer(t, s)}
        if keep == rel:
            return rel
        rel = keep


def step_bisimilar(p: Plts, q: Plts) -> bool:
    u = Pair(p, q)
    return u.roots in largest_step_bisimulation(u)


def _visible(lab):
    return tuple(e for e in lab if e != TAU) or (TAU,)


def _silent(lab):
    return all(e == TAU for e in lab)


def largest_branching_bisimulation(u: Pair) -> set:
    """Largest relation meeting the branching transfer clauses.

    A resolution s ~> s' is answered by a resolution of t related to s' (or by
    t itself when t is already resolved).  An action s -X-> s' is answered
    either silently (X silent and s' related to t) or by t reaching some t0
    through silent or probabilistic moves whose states all stay related to s,
    then t0 -Y-> t' with the same visible part and s' related to t'.  Class
    weights are compared on the classes the relation induces.
    """
    rel = {(s, t) for s in range(u.n) for t in range(u.n) if u.states[s].data == u.states[t].data}
    while True:
        cls = _components(u.n, rel)

        def dist(x):
            if u.states[x].kind == "prob":
                return _mass(u.prob[x], cls)
            return {cls[x]: Fraction(1)}

        def reach(s, t):
            seen, stack = {t}, [t]
            while stack:
                x = stack.pop()
                nxt = [y for _, y in u.prob[x]] + [y for lab, y in u.act[x] if _silent(lab)]
                for y in nxt:
                    if (s, y) in rel and y not in seen:
                        seen.add(y)
                        stack.append(y)
            return seen

        def answers(s, t):
            for _, s2 in u.prob[s]:
                targets = [t2 for _, t2 in u.prob[t]] if u.states[t].kind == "prob" else [t]
                if not any((s2, t2) in rel for t2 in targets):
                    return False
            closure = reach(s, t)
            if u.flag(s) and not any(u.flag(x) for x in closure):
                return False
            for lab, s2 in u.act[s]:
                if _silent(lab) and (s2, t) in rel:
                    continue
                ok = any(_visible(l2) == _visible(lab) and (s2, t2) in rel
                         for x in closure for l2, t2 in u.act[x])
                if not ok:
                    return False
            return True

        keep = {(s, t) for s, t in rel if dist(s) == dist(t) and answers(s, t) and answers(t, s)}
        if keep == rel:
            return rel
        rel = keep


def rooted_branching_bisimilar(p: Plts, q: Plts) -> bool:
    u = Pair(p, q)
    rel = largest_branching_bisimulation(u)
    a, b = u.roots
    if (a, b) not in rel:
        return False
    cls = _components(u.n, rel)

    def first_moves(root):
        edges = u.prob[root] if u.states[root].kind == "prob" else [(Fraction(1), root)]
        acc = defaultdict(Fraction)
        for w, r in edges:
            moves = frozenset((_visible(lab), cls[j]) for lab, j in u.act[r])
            acc[(cls[r], u.flag(r), moves)] += w
        return dict(acc)
    return first_moves(a) == first_moves(b)


# ---------------------------------------------------------------------------
# bisimilar variants of a system

def split_state(rng: random.Random, p: Plts) -> Plts:
    """Copy one non-root state and send part of its incoming traffic to the copy."""
    n = len(p.states)
    victim = rng.randrange(1, n) if n > 1 else 0
    copy = n
    st = p.states[victim]
    states = list(p.states) + [PState(st.kind, st.term, st.data, st.can_terminate)]
    prob = {i: list(e) for i, e in p.prob_edges.items()}
    act = {i: list(e) for i, e in p.act_edges.items()}
    if victim in prob:
        prob[copy] = list(prob[victim])
    if victim in act:
        act[copy] = list(act[victim])
    for i, edges in prob.items():
        new = []
        for w, j in edges:
            if j == victim and rng.random() < 0.7:
                new += [(w / 2, victim), (w / 2, copy)]
            else:
                new.append((w, j))
        prob[i] = new
    for i, edges in act.items():
        act[i] = sorted({(lab, copy if j == victim and rng.random() < 0.5 else j) for lab, j in edges})
    return Plts(states, prob, act, p.root)


def perturb(rng: random.Random, p: Plts, labels) -> Plts:
    """Redirect or relabel one action edge (may or may not change the class)."""
    act = {i: list(e) for i, e in p.act_edges.items()}
    sources = [i for i, e in act.items() if e]
    if not sources:
        return p
    i = rng.choice(sources)
    k = rng.randrange(len(act[i]))
    lab, j = act[i][k]
    if rng.random() < 0.5:
        lab = rng.choice(labels)
    else:
        j = rng.choice([x for x, st in enumerate(p.states) if st.kind == "prob"])
    act[i][k] = (lab, j)
    act[i] = sorted(set(act[i]))
    return Plts(list(p.states), dict(p.prob_edges), act, p.root)


__all__ = ["EPS", "Pair", "perturb", "rooted_branching_bisimilar", "split_state", "step_bisimilar",
           "world_distribution", "worlds"]
