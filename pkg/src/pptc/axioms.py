"""Axiom schemas and a randomized soundness harness.

Every axiom is a pair of term builders over named metavariables.  An
instantiation binds each metavariable to a closed term, event, guard,
probability, event set, natural number or step chain; both sides are then
compiled to transition systems and compared under the equivalence matching the
axiom's table (strong step bisimilarity, or rooted branching step
bisimilarity for the silent-step and abstraction laws).
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .config import DEFAULT_LIMITS, Limits
from .dataenv import DataEnv, eval_guard, weakest_precondition
from .equivalence import PRBSTEP, PSTEP, check
from .random_terms import (
    ALL_OPS, BASIC_OPS, PAR_OPS, PROBS, TermShape, random_guard, random_term,
)
from .semantics import build_plts
from .terms import (
    DELTA, EPS, TAU_T, AlgebraDecl, Alt, Atom, AtomGuard, Comm, ConflictElim, Encap,
    GuardAtom, Hide, LeftMerge, NotG, Par, ProbAlt, ProbG, Project, RecSpec, RecVar,
    Seq, Term, TermError, Unless, Whole, size,
)


class SideConditionViolated(TermError):
    pass


# ---------------------------------------------------------------------------
# families: an algebra, a term shape and optionally a data environment

@dataclass(frozen=True)
class Family:
    name: str
    algebra: AlgebraDecl
    shape: TermShape
    env: DataEnv | None = None
    hidden: tuple = ()       # events reserved for abstraction laws


EV4 = ("a", "b", "c", "d")

FAMILIES = {
    "basic": Family("basic", AlgebraDecl.build(EV4), TermShape(ops=BASIC_OPS, eps=True)),
    "par": Family("par", AlgebraDecl.build(EV4, comm={("a", "b"): "c"}, order=[("c", "d")]),
                  TermShape(ops=PAR_OPS, eps=True)),
    "conflict": Family("conflict", AlgebraDecl.build(
        EV4, comm={("a", "b"): "c"}, conflicts=[("a", "d")], prob_conflicts=[("b", "c")],
        order=[("c", "d"), ("d", "b")]), TermShape(ops=ALL_OPS, eps=True)),
    "encap": Family("encap", AlgebraDecl.build(EV4, comm={("a", "b"): "c"}),
                    TermShape(ops=PAR_OPS + ("encap",), eps=True)),
    "proj": Family("proj", AlgebraDecl.build(EV4, comm={("a", "b"): "c"}),
                   TermShape(ops=PAR_OPS, eps=True)),
    "guard": Family("guard", AlgebraDecl.build(EV4), TermShape(ops=PAR_OPS, guards=("phi", "psi")),
                    DataEnv(("s0", "s1", "s2"),
                            {"phi": {"s0", "s1"}, "psi": {"s1", "s2"}},
                            {("a", "s0"): {"s1"}, ("a", "s1"): {"s2"}, ("a", "s2"): {"s2"},
                             ("b", "s0"): {"s2"}, ("b", "s1"): {"s0"}, ("b", "s2"): {"s1"},
                             ("c", "s0"): {"s0"}, ("c", "s1"): {"s1"}, ("c", "s2"): {"s0"}})),
    "tau": Family("tau", AlgebraDecl.build(EV4 + ("i", "j")),
                  TermShape(alphabet=EV4 + ("i",), ops=PAR_OPS + ("hide",), tau=True, eps=True),
                  hidden=("i", "j")),
}


# ---------------------------------------------------------------------------
# axiom records

@dataclass(frozen=True)
class Axiom:
    name: str
    table: str
    family: str
    variables: tuple                 # ((name, kind), ...)
    build: Callable                  # (inst, ctx) -> (lhs, rhs)
    relation: str = PSTEP
    side: Callable | None = None     # (inst, ctx) -> bool
    spec: Callable | None = None     # (inst) -> RecSpec, for recursive laws


@dataclass
class Ctx:
    family: Family
    limits: Limits = DEFAULT_LIMITS
    mutate: frozenset = frozenset()

    @property
    def alg(self):
        return self.family.algebra

    def equivalent(self, p: Term, q: Term, relation: str = PSTEP, spec: RecSpec = RecSpec()) -> bool:
        env = self.family.env
        starts = env.states if env is not None else (None,)
        for s in starts:
            lp = build_plts(p, self.alg, spec, env, self.limits, data=s)
            lq = build_plts(q, self.alg, spec, env, self.limits, data=s)
            if not check(lp, lq, relation).equivalent:
                return False
        return True

    def idempotent(self, x: Term) -> bool:
        return self.equivalent(x, Alt(x, x))


def _vars(text: str) -> tuple:
    return tuple(tuple(v.split(":")) for v in text.split())


def _gamma(ctx, e1: Term, e2: Term) -> Term:
    g = ctx.alg.gamma(e1.name, e2.name)
    return Atom(g) if g else DELTA


def _chain(events) -> Term:
    out = None
    for e in events:
        leaf = Atom(e)
        out = leaf if out is None else LeftMerge(out, leaf)
    return out


def _pa2_weights(p: Fraction, r: Fraction, ctx) -> tuple:
    outer = p + r - p * r
    inner = p / outer
    if "PA2" in ctx.mutate:
        inner = 1 - inner   # deliberate fault for the mutation test
    return inner, outer


def _pa2(i, c):
    inner, outer = _pa2_weights(i["p"], i["r"], c)
    return (ProbAlt(i["x"], i["p"], ProbAlt(i["y"], i["r"], i["z"])),
            ProbAlt(ProbAlt(i["x"], inner, i["y"]), outer, i["z"]))


def _G(g):
    return GuardAtom(g)


def _neg(g):
    return GuardAtom(NotG(g))


def _conflict(i, c, a="e1", b="e2"):
    return c.alg.conflict(i[a].name, i[b].name)


def _pconflict(i, c, a="e1", b="e2"):
    return c.alg.pconflict(i[a].name, i[b].name)


def _lt(i, c, a, b):
    return c.alg.lt(i[a].name, i[b].name)


def _leq(i, c, a, b):
    return c.alg.leq(i[a].name, i[b].name)


def _all_states(pred):
    return lambda i, c: all(pred(i, c, s) for s in c.family.env.states)


def _wp(i, c):
    return weakest_precondition(i["e"].name, i["phi"], c.family.env)


def _deterministic(i, c):
    env = c.family.env
    return all(len(env.effect(i["e"].name, s)) == 1 for s in env.states)


def _B(name, table, family, variables, build, **kw):
    return Axiom(name, table, family, _vars(variables), build, **kw)


X, Y, Z, W = "x:term", "y:term", "z:term", "w:term"

BAPTC = [
    _B("A1", "BAPTC", "basic", f"{X} {Y}", lambda i, c: (Alt(i["x"], i["y"]), Alt(i["y"], i["x"]))),
    _B("A2", "BAPTC", "basic", f"{X} {Y} {Z}",
       lambda i, c: (Alt(Alt(i["x"], i["y"]), i["z"]), Alt(i["x"], Alt(i["y"], i["z"])))),
    _B("A3", "BAPTC", "basic", "e:event", lambda i, c: (Alt(i["e"], i["e"]), i["e"])),
    _B("A4", "BAPTC", "basic", f"{X} {Y} {Z}",
       lambda i, c: (Seq(Alt(i["x"], i["y"]), i["z"]), Alt(Seq(i["x"], i["z"]), Seq(i["y"], i["z"])))),
    _B("A5", "BAPTC", "basic", f"{X} {Y} {Z}",
       lambda i, c: (Seq(Seq(i["x"], i["y"]), i["z"]), Seq(i["x"], Seq(i["y"], i["z"])))),
    _B("A6", "BAPTC", "basic", X, lambda i, c: (Alt(i["x"], DELTA), i["x"])),
    _B("A7", "BAPTC", "basic", X, lambda i, c: (Seq(DELTA, i["x"]), DELTA)),
    _B("A8", "BAPTC", "basic", X, lambda i, c: (Seq(EPS, i["x"]), i["x"])),
    _B("A9", "BAPTC", "basic", X, lambda i, c: (Seq(i["x"], EPS), i["x"])),
    _B("PA1", "BAPTC", "basic", f"{X} p:prob {Y}",
       lambda i, c: (ProbAlt(i["x"], i["p"], i["y"]), ProbAlt(i["y"], 1 - i["p"], i["x"]))),
    _B("PA2", "BAPTC", "basic", f"{X} p:prob {Y} r:prob {Z}", _pa2),
    _B("PA3", "BAPTC", "basic", f"{X} p:prob", lambda i, c: (ProbAlt(i["x"], i["p"], i["x"]), i["x"])),
    _B("PA4", "BAPTC", "basic", f"{X} p:prob {Y} {Z}",
       lambda i, c: (Seq(ProbAlt(i["x"], i["p"], i["y"]), i["z"]),
                     ProbAlt(Seq(i["x"], i["z"]), i["p"], Seq(i["y"], i["z"])))),
    _B("PA5", "BAPTC", "basic", f"{X} p:prob {Y} {Z}",
       lambda i, c: (Alt(ProbAlt(i["x"], i["p"], i["y"]), i["z"]),
                     ProbAlt(Alt(i["x"], i["z"]), i["p"], Alt(i["y"], i["z"])))),
]

PARALLEL = [
    _B("P1", "parallelism", "par", f"{X} {Y}",
       lambda i, c: (Whole(i["x"], i["y"]), Alt(Par(i["x"], i["y"]), Comm(i["x"], i["y"]))),
       side=lambda i, c: c.idempotent(i["x"]) and c.idempotent(i["y"])),
    _B("P2", "parallelism", "par", f"{X} {Y}", lambda i, c: (Par(i["x"], i["y"]), Par(i["y"], i["x"]))),
    _B("P3", "parallelism", "par", f"{X} {Y} {Z}",
       lambda i, c: (Par(Par(i["x"], i["y"]), i["z"]), Par(i["x"], Par(i["y"], i["z"])))),
    _B("P4", "parallelism", "par", f"{X} {Y}",
       lambda i, c: (Par(i["x"], i["y"]), Alt(LeftMerge(i["x"], i["y"]), LeftMerge(i["y"], i["x"]))),
       side=lambda i, c: c.idempotent(i["x"]) and c.idempotent(i["y"])),
    _B("P5", "parallelism", "par", f"e1:event e2:event {Y}",
       lambda i, c: (LeftMerge(i["e1"], Seq(i["e2"], i["y"])), Seq(LeftMerge(i["e1"], i["e2"]), i["y"])),
       side=lambda i, c: _leq(i, c, "e1", "e2")),
    _B("P6", "parallelism", "par", f"e1:event e2:event {X}",
       lambda i, c: (LeftMerge(Seq(i["e1"], i["x"]), i["e2"]), Seq(LeftMerge(i["e1"], i["e2"]), i["x"])),
       side=lambda i, c: _leq(i, c, "e1", "e2")),
    _B("P7", "parallelism", "par", f"e1:event e2:event {X} {Y}",
       lambda i, c: (LeftMerge(Seq(i["e1"], i["x"]), Seq(i["e2"], i["y"])),
                     Seq(LeftMerge(i["e1"], i["e2"]), Whole(i["x"], i["y"]))),
       side=lambda i, c: _leq(i, c, "e1", "e2")),
    _B("P8", "parallelism", "par", f"{X} {Y} {Z}",
       lambda i, c: (LeftMerge(Alt(i["x"], i["y"]), i["z"]),
                     Alt(LeftMerge(i["x"], i["z"]), LeftMerge(i["y"], i["z"])))),
    _B("P9", "parallelism", "par", X, lambda i, c: (LeftMerge(DELTA, i["x"]), DELTA)),
    _B("P10", "parallelism", "par", X, lambda i, c: (LeftMerge(EPS, i["x"]), i["x"])),
    _B("P11", "parallelism", "par", X, lambda i, c: (LeftMerge(i["x"], EPS), i["x"])),
    _B("C1", "parallelism", "par", "e1:event e2:event",
       lambda i, c: (Comm(i["e1"], i["e2"]), _gamma(c, i["e1"], i["e2"]))),
    _B("C2", "parallelism", "par", f"e1:event e2:event {Y}",
       lambda i, c: (Comm(i["e1"], Seq(i["e2"], i["y"])), Seq(_gamma(c, i["e1"], i["e2"]), i["y"]))),
    _B("C3", "parallelism", "par", f"e1:event e2:event {X}",
       lambda i, c: (Comm(Seq(i["e1"], i["x"]), i["e2"]), Seq(_gamma(c, i["e1"], i["e2"]), i["x"]))),
    _B("C4", "parallelism", "par", f"e1:event e2:event {X} {Y}",
       lambda i, c: (Comm(Seq(i["e1"], i["x"]), Seq(i["e2"], i["y"])),
                     Seq(_gamma(c, i["e1"], i["e2"]), Whole(i["x"], i["y"])))),
    _B("C5", "parallelism", "par", f"{X} {Y} {Z}",
       lambda i, c: (Comm(Alt(i["x"], i["y"]), i["z"]), Alt(Comm(i["x"], i["z"]), Comm(i["y"], i["z"])))),
    _B("C6", "parallelism", "par", f"{X} {Y} {Z}",
       lambda i, c: (Comm(i["x"], Alt(i["y"], i["z"])), Alt(Comm(i["x"], i["y"]), Comm(i["x"], i["z"])))),
    _B("C7", "parallelism", "par", X, lambda i, c: (Comm(DELTA, i["x"]), DELTA)),
    _B("C8", "parallelism", "par", X, lambda i, c: (Comm(i["x"], DELTA), DELTA)),
    _B("C9", "parallelism", "par", X, lambda i, c: (Comm(EPS, i["x"]), DELTA)),
    _B("C10", "parallelism", "par", X, lambda i, c: (Comm(i["x"], EPS), DELTA)),
    _B("PM1", "parallelism", "par", f"{X} {Y} p:prob {Z}",
       lambda i, c: (Par(i["x"], ProbAlt(i["y"], i["p"], i["z"])),
                     ProbAlt(Par(i["x"], i["y"]), i["p"], Par(i["x"], i["z"])))),
    _B("PM2", "parallelism", "par", f"{X} p:prob {Y} {Z}",
       lambda i, c: (Par(ProbAlt(i["x"], i["p"], i["y"]), i["z"]),
                     ProbAlt(Par(i["x"], i["z"]), i["p"], Par(i["y"], i["z"])))),
    _B("PM3", "parallelism", "par", f"{X} {Y} p:prob {Z}",
       lambda i, c: (Comm(i["x"], ProbAlt(i["y"], i["p"], i["z"])),
                     ProbAlt(Comm(i["x"], i["y"]), i["p"], Comm(i["x"], i["z"])))),
    _B("PM4", "parallelism", "par", f"{X} p:prob {Y} {Z}",
       lambda i, c: (Comm(ProbAlt(i["x"], i["p"], i["y"]), i["z"]),
                     ProbAlt(Comm(i["x"], i["z"]), i["p"], Comm(i["y"], i["z"])))),
    _B("CE1", "parallelism", "conflict", "e:event", lambda i, c: (ConflictElim(i["e"]), i["e"])),
    _B("CE2", "parallelism", "conflict", "", lambda i, c: (ConflictElim(DELTA), DELTA)),
    _B("CE3", "parallelism", "conflict", "", lambda i, c: (ConflictElim(EPS), EPS)),
    _B("CE4", "parallelism", "conflict", f"{X} {Y}",
       lambda i, c: (ConflictElim(Alt(i["x"], i["y"])),
                     Alt(Unless(ConflictElim(i["x"]), i["y"]), Unless(ConflictElim(i["y"]), i["x"])))),
    _B("PCE1", "parallelism", "conflict", f"{X} p:prob {Y}",
       lambda i, c: (ConflictElim(ProbAlt(i["x"], i["p"], i["y"])),
                     ProbAlt(Unless(ConflictElim(i["x"]), i["y"]), i["p"], Unless(ConflictElim(i["y"]), i["x"])))),
    _B("CE5", "parallelism", "conflict", f"{X} {Y}",
       lambda i, c: (ConflictElim(Seq(i["x"], i["y"])), Seq(ConflictElim(i["x"]), ConflictElim(i["y"])))),
    _B("CE6", "parallelism", "conflict", f"{X} {Y}",
       lambda i, c: (ConflictElim(LeftMerge(i["x"], i["y"])),
                     Alt(LeftMerge(Unless(ConflictElim(i["x"]), i["y"]), i["y"]),
                         LeftMerge(Unless(ConflictElim(i["y"]), i["x"]), i["x"])))),
    _B("CE7", "parallelism", "conflict", f"{X} {Y}",
       lambda i, c: (ConflictElim(Comm(i["x"], i["y"])),
                     Alt(Comm(Unless(ConflictElim(i["x"]), i["y"]), i["y"]),
                         Comm(Unless(ConflictElim(i["y"]), i["x"]), i["x"])))),
    _B("U1", "parallelism", "conflict", "e1:event e2:event",
       lambda i, c: (Unless(i["e1"], i["e2"]), TAU_T), side=_conflict),
    _B("U2", "parallelism", "conflict", "e1:event e2:event e3:event",
       lambda i, c: (Unless(i["e1"], i["e3"]), i["e1"]),
       side=lambda i, c: _conflict(i, c) and _lt(i, c, "e2", "e3")),
    _B("U3", "parallelism", "conflict", "e1:event e2:event e3:event",
       lambda i, c: (Unless(i["e3"], i["e1"]), TAU_T),
       side=lambda i, c: _conflict(i, c) and _lt(i, c, "e2", "e3") and i["e1"] != i["e3"]),
    _B("PU1", "parallelism", "conflict", "e1:event e2:event",
       lambda i, c: (Unless(i["e1"], i["e2"]), TAU_T), side=_pconflict),
    _B("PU2", "parallelism", "conflict", "e1:event e2:event e3:event",
       lambda i, c: (Unless(i["e1"], i["e3"]), i["e1"]),
       side=lambda i, c: _pconflict(i, c) and _lt(i, c, "e2", "e3")),
    _B("PU3", "parallelism", "conflict", "e1:event e2:event e3:event",
       lambda i, c: (Unless(i["e3"], i["e1"]), TAU_T),
       side=lambda i, c: _pconflict(i, c) and _lt(i, c, "e2", "e3") and i["e1"] != i["e3"]),
    _B("U4", "parallelism", "conflict", "e:event", lambda i, c: (Unless(i["e"], DELTA), i["e"])),
    _B("U5", "parallelism", "conflict", "e:event", lambda i, c: (Unless(DELTA, i["e"]), DELTA)),
    _B("U6", "parallelism", "conflict", "e:event", lambda i, c: (Unless(i["e"], EPS), i["e"])),
    _B("U7", "parallelism", "conflict", "e:event", lambda i, c: (Unless(EPS, i["e"]), EPS)),
    _B("U8", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(Alt(i["x"], i["y"]), i["z"]), Alt(Unless(i["x"], i["z"]), Unless(i["y"], i["z"])))),
    _B("PU4", "parallelism", "conflict", f"{X} p:prob {Y} {Z}",
       lambda i, c: (Unless(ProbAlt(i["x"], i["p"], i["y"]), i["z"]),
                     ProbAlt(Unless(i["x"], i["z"]), i["p"], Unless(i["y"], i["z"])))),
    _B("U9", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(Seq(i["x"], i["y"]), i["z"]), Seq(Unless(i["x"], i["z"]), Unless(i["y"], i["z"])))),
    _B("U10", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(LeftMerge(i["x"], i["y"]), i["z"]),
                     LeftMerge(Unless(i["x"], i["z"]), Unless(i["y"], i["z"])))),
    _B("U11", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(Comm(i["x"], i["y"]), i["z"]), Comm(Unless(i["x"], i["z"]), Unless(i["y"], i["z"])))),
    _B("U12", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(i["x"], Alt(i["y"], i["z"])), Unless(Unless(i["x"], i["y"]), i["z"]))),
    _B("PU5", "parallelism", "conflict", f"{X} {Y} p:prob {Z}",
       lambda i, c: (Unless(i["x"], ProbAlt(i["y"], i["p"], i["z"])), Unless(Unless(i["x"], i["y"]), i["z"]))),
    _B("U13", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(i["x"], Seq(i["y"], i["z"])), Unless(Unless(i["x"], i["y"]), i["z"]))),
    _B("U14", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(i["x"], LeftMerge(i["y"], i["z"])), Unless(Unless(i["x"], i["y"]), i["z"]))),
    _B("U15", "parallelism", "conflict", f"{X} {Y} {Z}",
       lambda i, c: (Unless(i["x"], Comm(i["y"], i["z"])), Unless(Unless(i["x"], i["y"]), i["z"]))),
]

ENCAP = [
    _B("D1", "encapsulation", "encap", "e:event H:set",
       lambda i, c: (Encap(i["H"], i["e"]), i["e"]), side=lambda i, c: i["e"].name not in i["H"]),
    _B("D2", "encapsulation", "encap", "e:event H:set",
       lambda i, c: (Encap(i["H"], i["e"]), DELTA), side=lambda i, c: i["e"].name in i["H"]),
    _B("D3", "encapsulation", "encap", "H:set", lambda i, c: (Encap(i["H"], DELTA), DELTA)),
    _B("D4", "encapsulation", "encap", f"H:set {X} {Y}",
       lambda i, c: (Encap(i["H"], Alt(i["x"], i["y"])), Alt(Encap(i["H"], i["x"]), Encap(i["H"], i["y"])))),
    _B("D5", "encapsulation", "encap", f"H:set {X} {Y}",
       lambda i, c: (Encap(i["H"], Seq(i["x"], i["y"])), Seq(Encap(i["H"], i["x"]), Encap(i["H"], i["y"])))),
    _B("D6", "encapsulation", "encap", f"H:set {X} {Y}",
       lambda i, c: (Encap(i["H"], LeftMerge(i["x"], i["y"])),
                     LeftMerge(Encap(i["H"], i["x"]), Encap(i["H"], i["y"])))),
    _B("PD1", "encapsulation", "encap", f"H:set {X} p:prob {Y}",
       lambda i, c: (Encap(i["H"], ProbAlt(i["x"], i["p"], i["y"])),
                     ProbAlt(Encap(i["H"], i["x"]), i["p"], Encap(i["H"], i["y"])))),
]

PROJECTION = [
    _B("PR1", "projection", "proj", f"n:nat {X} {Y}",
       lambda i, c: (Project(i["n"], Alt(i["x"], i["y"])), Alt(Project(i["n"], i["x"]), Project(i["n"], i["y"])))),
    _B("PPR1", "projection", "proj", f"n:nat {X} p:prob {Y}",
       lambda i, c: (Project(i["n"], ProbAlt(i["x"], i["p"], i["y"])),
                     ProbAlt(Project(i["n"], i["x"]), i["p"], Project(i["n"], i["y"])))),
    _B("PR2", "projection", "proj", f"n:nat {X} {Y}",
       lambda i, c: (Project(i["n"], LeftMerge(i["x"], i["y"])),
                     LeftMerge(Project(i["n"], i["x"]), Project(i["n"], i["y"])))),
    _B("PR3", "projection", "proj", "n:nat k:chain",
       lambda i, c: (Project(i["n"] + 1, i["k"]), i["k"])),
    _B("PR4", "projection", "proj", f"n:nat k:chain {X}",
       lambda i, c: (Project(i["n"] + 1, Seq(i["k"], i["x"])), Seq(i["k"], Project(i["n"], i["x"])))),
    _B("PR5", "projection", "proj", X, lambda i, c: (Project(0, i["x"]), DELTA)),
    _B("PR6", "projection", "proj", "n:nat", lambda i, c: (Project(i["n"], DELTA), DELTA)),
]

GUARDS = [
    _B("G1", "guards", "guard", "phi:guard", lambda i, c: (Seq(_G(i["phi"]), _neg(i["phi"])), DELTA)),
    _B("G2", "guards", "guard", "phi:guard", lambda i, c: (Alt(_G(i["phi"]), _neg(i["phi"])), EPS)),
    _B("PG1", "guards", "guard", "phi:guard p:prob",
       lambda i, c: (_G(ProbG(i["phi"], i["p"], NotG(i["phi"]))), EPS)),
    _B("G3", "guards", "guard", "phi:guard", lambda i, c: (Seq(_G(i["phi"]), DELTA), DELTA)),
    _B("G4", "guards", "guard", f"phi:guard {X} {Y}",
       lambda i, c: (Seq(_G(i["phi"]), Alt(i["x"], i["y"])),
                     Alt(Seq(_G(i["phi"]), i["x"]), Seq(_G(i["phi"]), i["y"])))),
    _B("PG2", "guards", "guard", f"phi:guard {X} p:prob {Y}",
       lambda i, c: (Seq(_G(i["phi"]), ProbAlt(i["x"], i["p"], i["y"])),
                     ProbAlt(Seq(_G(i["phi"]), i["x"]), i["p"], Seq(_G(i["phi"]), i["y"])))),
    _B("G5", "guards", "guard", f"phi:guard {X} {Y}",
       lambda i, c: (Seq(_G(i["phi"]), Seq(i["x"], i["y"])), Seq(Seq(_G(i["phi"]), i["x"]), i["y"]))),
    _B("G6", "guards", "guard", f"phi:guard psi:guard {X}",
       lambda i, c: (Seq(Alt(_G(i["phi"]), _G(i["psi"])), i["x"]),
                     Alt(Seq(_G(i["phi"]), i["x"]), Seq(_G(i["psi"]), i["x"])))),
    _B("PG3", "guards", "guard", f"phi:guard p:prob psi:guard {X}",
       lambda i, c: (Seq(ProbAlt(_G(i["phi"]), i["p"], _G(i["psi"])), i["x"]),
                     ProbAlt(Seq(_G(i["phi"]), i["x"]), i["p"], Seq(_G(i["psi"]), i["x"])))),
    _B("G7", "guards", "guard", f"phi:guard psi:guard {X}",
       lambda i, c: (Seq(Seq(_G(i["phi"]), _G(i["psi"])), i["x"]), Seq(_G(i["phi"]), Seq(_G(i["psi"]), i["x"])))),
    _B("G8", "guards", "guard", "phi:guard", lambda i, c: (_G(i["phi"]), EPS),
       side=_all_states(lambda i, c, s: eval_guard(i["phi"], s, c.family.env))),
    _B("G9", "guards", "guard", "phi:guard psi:guard",
       lambda i, c: (Seq(_G(i["phi"]), _G(i["psi"])), DELTA),
       side=_all_states(lambda i, c, s: not (eval_guard(i["phi"], s, c.family.env)
                                             and eval_guard(i["psi"], s, c.family.env)))),
    _B("G10", "guards", "guard", "e:event phi:guard",
       lambda i, c: (Seq(Seq(_G(_wp(i, c)), i["e"]), _G(i["phi"])), Seq(_G(_wp(i, c)), i["e"]))),
    _B("G11", "guards", "guard", "e:event phi:guard",
       lambda i, c: (Seq(Seq(_neg(_wp(i, c)), i["e"]), _neg(i["phi"])), Seq(_neg(_wp(i, c)), i["e"])),
       side=_deterministic),
    _B("G12", "guards", "guard", f"phi:guard {X} {Y}",
       lambda i, c: (Seq(_G(i["phi"]), LeftMerge(i["x"], i["y"])),
                     LeftMerge(Seq(_G(i["phi"]), i["x"]), Seq(_G(i["phi"]), i["y"])))),
    _B("G13", "guards", "guard", f"phi:guard {X} {Y}",
       lambda i, c: (Seq(_G(i["phi"]), Comm(i["x"], i["y"])),
                     Comm(Seq(_G(i["phi"]), i["x"]), Seq(_G(i["phi"]), i["y"])))),
    _B("G14", "guards", "guard", "phi:guard", lambda i, c: (LeftMerge(DELTA, _G(i["phi"])), DELTA)),
    _B("G15", "guards", "guard", "phi:guard", lambda i, c: (Comm(_G(i["phi"]), DELTA), DELTA)),
    _B("G16", "guards", "guard", "phi:guard", lambda i, c: (Comm(DELTA, _G(i["phi"])), DELTA)),
    _B("G17", "guards", "guard", "phi:guard", lambda i, c: (LeftMerge(_G(i["phi"]), EPS), _G(i["phi"]))),
    _B("G18", "guards", "guard", "phi:guard", lambda i, c: (LeftMerge(EPS, _G(i["phi"])), _G(i["phi"]))),
    _B("G19", "guards", "guard", "phi:guard", lambda i, c: (Comm(_G(i["phi"]), EPS), DELTA)),
    _B("G20", "guards", "guard", "phi:guard", lambda i, c: (Comm(EPS, _G(i["phi"])), DELTA)),
    _B("G21", "guards", "guard", "phi:guard", lambda i, c: (LeftMerge(_G(i["phi"]), _neg(i["phi"])), DELTA)),
    _B("G22", "guards", "guard", "phi:guard", lambda i, c: (ConflictElim(_G(i["phi"])), _G(i["phi"]))),
    _B("G23", "guards", "guard", "phi:guard H:set", lambda i, c: (Encap(i["H"], _G(i["phi"])), _G(i["phi"]))),
    _B("G24", "guards", "guard", "phi:guard psi:guard",
       lambda i, c: (LeftMerge(_G(i["phi"]), _G(i["psi"])), DELTA),
       side=_all_states(lambda i, c, s: not (eval_guard(i["phi"], s, c.family.env)
                                             and eval_guard(i["psi"], s, c.family.env)))),
]


def _hidden_set(i, c):
    return frozenset(i["I"])


SILENT = [
    _B("B1", "silent step", "tau", f"{X} {Y} {Z} p:prob {W}",
       lambda i, c: (Seq(i["x"], ProbAlt(Alt(i["y"], Seq(TAU_T, Alt(i["y"], i["z"]))), i["p"], i["w"])),
                     Seq(i["x"], ProbAlt(Alt(i["y"], i["z"]), i["p"], i["w"]))),
       relation=PRBSTEP, side=lambda i, c: c.idempotent(i["y"]) and c.idempotent(i["z"])),
    _B("B2", "silent step", "tau", f"{X} {Y} {Z} p:prob {W}",
       lambda i, c: (LeftMerge(i["x"], ProbAlt(Alt(i["y"], LeftMerge(TAU_T, Alt(i["y"], i["z"]))), i["p"], i["w"])),
                     LeftMerge(i["x"], ProbAlt(Alt(i["y"], i["z"]), i["p"], i["w"]))),
       relation=PRBSTEP, side=lambda i, c: c.idempotent(i["y"]) and c.idempotent(i["z"])),
]

ABSTRACTION = [
    _B("TI1", "abstraction", "tau", "e:event I:hset",
       lambda i, c: (Hide(i["I"], i["e"]), i["e"]), relation=PRBSTEP,
       side=lambda i, c: i["e"].name not in i["I"]),
    _B("TI2", "abstraction", "tau", "e:event I:hset",
       lambda i, c: (Hide(i["I"], i["e"]), TAU_T), relation=PRBSTEP,
       side=lambda i, c: i["e"].name in i["I"]),
    _B("TI3", "abstraction", "tau", "I:hset", lambda i, c: (Hide(i["I"], DELTA), DELTA), relation=PRBSTEP),
    _B("TI4", "abstraction", "tau", f"I:hset {X} {Y}",
       lambda i, c: (Hide(i["I"], Alt(i["x"], i["y"])), Alt(Hide(i["I"], i["x"]), Hide(i["I"], i["y"]))),
       relation=PRBSTEP),
    _B("PTI1", "abstraction", "tau", f"I:hset {X} p:prob {Y}",
       lambda i, c: (Hide(i["I"], ProbAlt(i["x"], i["p"], i["y"])),
                     ProbAlt(Hide(i["I"], i["x"]), i["p"], Hide(i["I"], i["y"]))), relation=PRBSTEP),
    _B("TI5", "abstraction", "tau", f"I:hset {X} {Y}",
       lambda i, c: (Hide(i["I"], Seq(i["x"], i["y"])), Seq(Hide(i["I"], i["x"]), Hide(i["I"], i["y"]))),
       relation=PRBSTEP),
    _B("TI6", "abstraction", "tau", f"I:hset {X} {Y}",
       lambda i, c: (Hide(i["I"], LeftMerge(i["x"], i["y"])),
                     LeftMerge(Hide(i["I"], i["x"]), Hide(i["I"], i["y"]))), relation=PRBSTEP),
    _B("G28", "abstraction", "guard", "phi:guard H:set",
       lambda i, c: (Hide(i["H"], _G(i["phi"])), _G(i["phi"])), relation=PRBSTEP),
]


# recursive verification rules: the premise is turned into a recursive specification

def _vr1_spec(i):
    return RecSpec((("VX", Alt(i["y"], Seq(i["k"], RecVar("VX")))),))


def _vr2_spec(i):
    return RecSpec((("VX", ProbAlt(i["z"], i["p"], Alt(i["u"], Seq(i["k"], RecVar("VX"))))),))


def _vr3_spec(i):
    return RecSpec((
        ("VX", Alt(i["z"], Seq(i["k"], RecVar("VY")))),
        ("VY", ProbAlt(i["z"], i["p"], Alt(i["u"], Seq(i["k2"], RecVar("VX"))))),
        ("VY2", ProbAlt(i["z"], i["p"], Alt(i["u"], Seq(i["k"], RecVar("VY2"))))),
    ))


def _tau_hide(i, t):
    return Seq(TAU_T, Hide(i["I"], t))


def _absorbs(big, small):
    return lambda i, c: c.equivalent(i[big], Alt(i[big], i[small]))


VR = [
    _B("VR1", "verification rules", "tau", f"I:hset k:ichain {Y}",
       lambda i, c: (_tau_hide(i, RecVar("VX")), _tau_hide(i, i["y"])), relation=PRBSTEP,
       side=lambda i, c: c.idempotent(i["y"]), spec=_vr1_spec),
    _B("VR2", "verification rules", "tau", f"I:hset k:ichain {Z} p:prob u:term",
       lambda i, c: (_tau_hide(i, RecVar("VX")), _tau_hide(i, i["z"])), relation=PRBSTEP,
       side=lambda i, c: _absorbs("z", "u")(i, c) and c.idempotent(i["z"]), spec=_vr2_spec),
    _B("VR3", "verification rules", "tau", f"I:hset k:ichain k2:ichain {Z} p:prob u:term",
       lambda i, c: (_tau_hide(i, RecVar("VX")), _tau_hide(i, RecVar("VY2"))), relation=PRBSTEP,
       side=lambda i, c: _absorbs("z", "u")(i, c) and c.idempotent(i["z"]), spec=_vr3_spec),
]

AXIOMS = {ax.name: ax for ax in BAPTC + PARALLEL + ENCAP + PROJECTION + GUARDS + SILENT + ABSTRACTION + VR}
TABLES = tuple(dict.fromkeys(ax.table for ax in AXIOMS.values()))


# ---------------------------------------------------------------------------
# instantiation and checking

def check_axiom(axiom_id: str, inst: dict, ctx: Ctx | None = None, family: Family | None = None) -> bool:
    """Check one instantiation of an axiom; raises SideConditionViolated if the premise fails."""
    ax = AXIOMS[axiom_id]
    if ctx is None:
        ctx = Ctx(family or FAMILIES[ax.family])
    if ax.side is not None and not ax.side(inst, ctx):
        raise SideConditionViolated(f"{axiom_id}: side condition fails for this instantiation")
    lhs, rhs = ax.build(inst, ctx)
    spec = ax.spec(inst) if ax.spec else RecSpec()
    return ctx.equivalent(lhs, rhs, ax.relation, spec)


def _concurrent_events(rng, alg, pool, k):
    for _ in range(20):
        evs = [rng.choice(pool) for _ in range(k)]
        if all(alg.concurrent(a, b) for n, a in enumerate(evs) for b in evs[n + 1:]):
            return sorted(evs)
    return [rng.choice(pool)]


def random_value(rng: random.Random, kind: str, fam: Family, budget: int):
    shape = fam.shape
    events = tuple(e for e in shape.alphabet if e not in fam.hidden) or shape.alphabet
    if kind == "term":
        return random_term(rng, rng.randint(1, max(1, budget)), shape)
    if kind == "event":
        return Atom(rng.choice(events))
    if kind == "guard":
        atoms = list(fam.env.tests) if fam.env else ["phi"]
        return random_guard(rng, atoms, rng.randint(1, 3))
    if kind == "prob":
        return rng.choice(PROBS)
    if kind == "set":
        return frozenset(rng.sample(events, rng.randint(1, 2)))
    if kind == "hset":
        extra = rng.sample(events, rng.randint(0, 1))
        return frozenset(fam.hidden + tuple(extra))
    if kind == "nat":
        return rng.randint(0, 3)
    if kind == "chain":
        return _chain(_concurrent_events(rng, fam.algebra, events, rng.randint(1, 3)))
    if kind == "ichain":
        return _chain(sorted(rng.choice(fam.hidden) for _ in range(rng.randint(1, 2))))
    raise ValueError(kind)


def random_instance(ax: Axiom, rng: random.Random, ctx: Ctx, max_size: int = 12, tries: int = 400):
    """A random instantiation meeting the side condition whose left side has size <= max_size."""
    fam = ctx.family
    n_terms = sum(1 for _, k in ax.variables if k in ("term",)) or 1
    budget = max(1, (max_size - 3) // n_terms)
    for _ in range(tries):
        inst = {}
        for name, kind in ax.variables:
            inst[name] = random_value(rng, kind, fam, budget)
        lhs, rhs = ax.build(inst, ctx)
        if size(lhs) > max_size:
            continue
        if ax.side is not None and not ax.side(inst, ctx):
            continue
        return inst
    return None


@dataclass
class AxiomResult:
    name: str
    table: str
    relation: str
    checked: int = 0
    failed: int = 0
    skipped: int = 0
    counterexample: str | None = None
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.failed == 0 and self.checked > 0


@dataclass
class SuiteReport:
    seed: int
    count: int
    results: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    def text(self) -> str:
        lines = [f"axiom suite: seed {self.seed}, {self.count} instances per axiom"]
        for r in self.results:
            verdict = "pass" if r.passed else "FAIL"
            lines.append(f"{verdict:4} {r.name:5} [{r.table}] {r.checked - r.failed}/{r.checked} "
                         f"({r.relation}, {r.seconds:.2f}s)")
            if r.counterexample:
                lines.append(f"     counterexample: {r.counterexample}")
        n_fail = len(self.failures())
        lines.append(f"{len(self.results) - n_fail}/{len(self.results)} axioms pass")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "count": self.count, "all_passed": self.all_passed,
                "axioms": [{"name": r.name, "table": r.table, "relation": r.relation,
                            "checked": r.checked, "failed": r.failed, "skipped": r.skipped,
                            "passed": r.passed, "counterexample": r.counterexample}
                           for r in self.results]}


def _show_inst(inst: dict) -> str:
    from .parser import format_prob, pretty_guard, pretty_print
    parts = []
    for k, v in inst.items():
        if isinstance(v, Term):
            parts.append(f"{k}={pretty_print(v)}")
        elif isinstance(v, Fraction):
            parts.append(f"{k}={format_prob(v)}")
        elif isinstance(v, frozenset):
            parts.append(f"{k}={{{','.join(sorted(v))}}}")
        elif isinstance(v, (int, str)):
            parts.append(f"{k}={v}")
        else:
            parts.append(f"{k}={pretty_guard(v)}")
    return ", ".join(parts)


def run_axiom(ax: Axiom, count: int, rng: random.Random, ctx: Ctx) -> AxiomResult:
    res = AxiomResult(ax.name, ax.table, ax.relation)
    start = time.perf_counter()
    for _ in range(count):
        inst = random_instance(ax, rng, ctx)
        if inst is None:
            res.skipped += 1
            continue
        res.checked += 1
        if not check_axiom(ax.name, inst, ctx):
            res.failed += 1
            if res.counterexample is None:
                res.counterexample = _show_inst(inst)
    res.seconds = time.perf_counter() - start
    return res


def run_suite(seed: int = 0, count: int = 50, names=None, mutate=(), limits: Limits = DEFAULT_LIMITS,
              progress: Callable | None = None) -> SuiteReport:
    """Instantiate every selected axiom `count` times; each axiom draws from its own seeded stream."""
    report = SuiteReport(seed, count)
    for name, ax in AXIOMS.items():
        if names and name not in names:
            continue
        ctx = Ctx(FAMILIES[ax.family], limits, frozenset(mutate))
        rng = random.Random(f"{seed}:{name}")
        res = run_axiom(ax, count, rng, ctx)
        report.results.append(res)
        if progress:
            progress(res)
    return report
