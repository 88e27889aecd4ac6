"""Seeded generators for terms, guards, data environments, specifications and systems."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .dataenv import DataEnv
from .semantics import Plts, PState
from .terms import (
    DELTA, EPS, TAU_T, Alt, Atom, AtomGuard, Comm, ConflictElim, Encap, GuardAtom, Hide,
    LeftMerge, NotG, Par, PlusG, ProbAlt, RecSpec, RecVar, Seq, SeqG, Term, Unless, Whole,
)

PROBS = (Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3))
ALPHABET = ("a", "b", "c", "d")

BASIC_OPS = ("seq", "alt", "prob")
PAR_OPS = BASIC_OPS + ("whole", "par", "lmerge", "comm")
ALL_OPS = PAR_OPS + ("theta", "unless", "encap")


@dataclass(frozen=True)
class TermShape:
    alphabet: tuple = ALPHABET
    ops: tuple = ALL_OPS
    probs: tuple = PROBS
    delta: bool = True
    tau: bool = False
    eps: bool = False
    guards: tuple = ()


def random_leaf(rng: random.Random, shape: TermShape) -> Term:
    pool = [Atom(a) for a in shape.alphabet]
    if shape.delta and rng.random() < 0.1:
        return DELTA
    if shape.tau and rng.random() < 0.15:
        return TAU_T
    if shape.eps and rng.random() < 0.1:
        return EPS
    if shape.guards and rng.random() < 0.2:
        g = AtomGuard(rng.choice(shape.guards))
        return GuardAtom(NotG(g) if rng.random() < 0.3 else g)
    return rng.choice(pool)


_UNARY = ("theta", "encap", "hide")


def random_term(rng: random.Random, size: int, shape: TermShape = TermShape()) -> Term:
    """A random closed term with exactly `size` constructor nodes (leaves count as 1)."""
    if size <= 1:
        return random_leaf(rng, shape)
    ops = [o for o in shape.ops if size >= 3 or o in _UNARY]
    if not ops:
        return random_leaf(rng, shape)
    op = rng.choice(ops)
    if op in _UNARY:
        arg = random_term(rng, size - 1, shape)
        if op == "theta":
            return ConflictElim(arg)
        evs = frozenset(rng.sample(shape.alphabet, rng.randint(1, 2)))
        return Encap(evs, arg) if op == "encap" else Hide(evs, arg)
    k = rng.randint(1, size - 2)
    left = random_term(rng, k, shape)
    right = random_term(rng, size - 1 - k, shape)
    if op == "seq":
        return Seq(left, right)
    if op == "alt":
        return Alt(left, right)
    if op == "prob":
        return ProbAlt(left, rng.choice(shape.probs), right)
    if op == "whole":
        return Whole(left, right)
    if op == "par":
        return Par(left, right)
    if op == "lmerge":
        return LeftMerge(left, right)
    if op == "comm":
        return Comm(left, right)
    if op == "unless":
        return Unless(left, right)
    raise ValueError(op)


def random_guard(rng: random.Random, atoms, size: int = 3):
    if size <= 1:
        g = AtomGuard(rng.choice(atoms))
        return NotG(g) if rng.random() < 0.3 else g
    k = rng.randint(1, size - 1)
    op = rng.choice((PlusG, SeqG))
    return op(random_guard(rng, atoms, k), random_guard(rng, atoms, size - k))


def random_env(rng: random.Random, n_states: int, atoms, events, deterministic: bool = False) -> DataEnv:
    states = tuple(f"s{i}" for i in range(n_states))
    tests = {a: frozenset(s for s in states if rng.random() < 0.5) for a in atoms}
    effects = {}
    for e in events:
        for s in states:
            k = 1 if deterministic else rng.choice((1, 1, 2))
            effects[(e, s)] = frozenset(rng.sample(states, k))
    return DataEnv(states, tests, effects, states[0])


def random_linear_spec(rng: random.Random, n_vars: int, alphabet=("a", "b"), probs=PROBS,
                       prefix: str = "X") -> RecSpec:
    """A guarded linear specification: sums of e.X, e and probabilistic choices of such sums."""
    names = [f"{prefix}{i}" for i in range(n_vars)]

    def summand():
        e = Atom(rng.choice(alphabet))
        if rng.random() < 0.8:
            return Seq(e, RecVar(rng.choice(names)))
        return e

    def body():
        parts = [summand() for _ in range(rng.randint(1, 2))]
        t = parts[0]
        for q in parts[1:]:
            t = Alt(t, q)
        if rng.random() < 0.3:
            other = summand()
            t = ProbAlt(t, rng.choice(probs), other)
        return t

    return RecSpec(tuple((n, body()) for n in names))


def rename_spec(spec: RecSpec, prefix: str) -> tuple[RecSpec, dict]:
    """The same specification with variables renamed apart."""
    from .terms import substitute
    mapping = {n: f"{prefix}{n}" for n, _ in spec.equations}
    binds = {n: RecVar(m) for n, m in mapping.items()}
    return RecSpec(tuple((mapping[n], substitute(t, binds)) for n, t in spec.equations)), mapping


def random_plts(rng: random.Random, n_states: int, labels=(("a",), ("b",), ("a", "b")),
                probs=PROBS, tau: bool = False) -> Plts:
    """A random alternating system with at most n_states states.

    States alternate between probabilistic and resolved kinds; resolved states
    without outgoing steps may be terminated.  Weights are exact and sum to one.
    """
    labels = tuple(labels) + ((("tau",),) if tau else ())
    n_prob = max(1, n_states // 2)
    n_res = max(1, n_states - n_prob)
    states = [PState("prob", EPS) for _ in range(n_prob)]
    res_ids = list(range(n_prob, n_prob + n_res))
    kinds = []
    for _ in res_ids:
        kinds.append("terminated" if rng.random() < 0.25 else "resolved")
    states += [PState(k, EPS, None, k == "terminated") for k in kinds]
    prob_edges, act_edges = {}, {}
    for i in range(n_prob):
        k = rng.randint(1, min(3, n_res))
        targets = rng.sample(res_ids, k)
        ws = _split_one(rng, k, probs)
        prob_edges[i] = list(zip(ws, targets))
    for j, kind in zip(res_ids, kinds):
        if kind == "terminated":
            act_edges[j] = []
            continue
        edges = set()
        for _ in range(rng.randint(0, 2)):
            edges.add((rng.choice(labels), rng.randrange(n_prob)))
        act_edges[j] = sorted(edges)
    return Plts(states, prob_edges, act_edges, 0)


def _split_one(rng, k, probs):
    if k == 1:
        return [Fraction(1)]
    out = []
    rest = Fraction(1)
    for _ in range(k - 1):
        w = rest * rng.choice(probs)
        out.append(w)
        rest -= w
    out.append(rest)
    return out


def mutate_spec(rng: random.Random, spec: RecSpec, root: str, fresh: str = "z") -> tuple[RecSpec, int]:
    """Replace one event of an equation reachable from `root` by an event no equation uses.

    Returns the mutated spec and the depth (number of steps) at which the new
    event first becomes possible, so Π_n at that depth must tell them apart.
    """
    from .terms import free_recvars
    bodies = dict(spec.equations)
    depth = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            for w in sorted(free_recvars(bodies[v])):
                if w not in depth:
                    depth[w] = depth[v] + 1
                    nxt.append(w)
        frontier = nxt
    target = rng.choice(sorted(depth))
    body = bodies[target]
    n_atoms = sum(1 for t in _leaves(body) if isinstance(t, Atom))
    pick = rng.randrange(n_atoms)
    counter = [0]

    def swap(t):
        if isinstance(t, Atom):
            hit = counter[0] == pick
            counter[0] += 1
            return Atom(fresh) if hit else t
        if isinstance(t, (Seq, Alt)):
            return type(t)(swap(t.left), swap(t.right))
        if isinstance(t, ProbAlt):
            return ProbAlt(swap(t.left), t.prob, swap(t.right))
        return t

    bodies[target] = swap(body)
    return RecSpec(tuple((n, bodies[n]) for n, _ in spec.equations)), depth[target] + 1


def _leaves(t):
    if isinstance(t, (Seq, Alt, ProbAlt)):
        yield from _leaves(t.left)
        yield from _leaves(t.right)
    else:
        yield t
