"""Term rewriting to basic-term normal form.

Rules are declared as (name, left pattern, right pattern, side condition)
over metavariables.  Sums are kept in the canonical A1/A2 arrangement, so a
pattern ``x + y`` sees the first summand as x and the remaining sum as y;
every inner node of a sum chain is itself tried, which covers adjacent
summand pairs.  Chains of probabilistic choices are normalized in one step
(flatten, merge equal leaves, sort, re-nest to the left).

The strategy is leftmost-innermost.  Two positions are not normalized before
their parent: the right operand of the unless operator (its events matter,
so it is decomposed structurally instead) and, in projection mode, the
continuation of a sequential composition (it is only reached through a
projection, which keeps unfolding finite).
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable

from .config import DEFAULT_LIMITS, Limits
from .dataenv import DataEnv, UnknownGuardAtom, satisfying, weakest_precondition
from .terms import (
    DELTA, EMPTY_ALGEBRA, EMPTY_SPEC, EPS, TAU, TAU_T, AlgebraDecl, Alt, Atom, AtomGuard,
    Comm, ConflictElim, DeltaG, Encap, EpsG, GuardAtom, GuardExpr, Hide, LeftMerge,
    LeftMergeG, NotG, Par, PlusG, ProbAlt, ProbG, Project, RecSpec, RecVar, Seq, SeqG,
    StateSetG, Tau, Term, TermError, Unless, WpG, Whole, Delta, Epsilon, alt_of,
    children, guard_key, has_guards, may_terminate, prob_free, rebuild, summands, term_key,
)


class NotClosed(TermError):
    def __init__(self, var):
        super().__init__(f"term is not closed: recursion variable {var}")
        self.var = var


class StepLimitExceeded(TermError):
    def __init__(self, limit):
        super().__init__(f"rewriting exceeded {limit} steps")
        self.limit = limit


# ---------------------------------------------------------------------------
# patterns

class M:
    """Metavariable.  Kinds: term, chain (event or step chain), guard (guard
    expression), prob, set, nat."""
    __slots__ = ("name", "kind")

    def __init__(self, name, kind="term"):
        self.name, self.kind = name, kind

    def __repr__(self):
        return self.name


class Fn:
    """Computed right-hand side."""
    __slots__ = ("f", "text")

    def __init__(self, f, text):
        self.f, self.text = f, text

    def __repr__(self):
        return self.text


def is_chain(t) -> bool:
    if isinstance(t, (Atom, Tau)):
        return True
    return isinstance(t, LeftMerge) and is_chain(t.left) and is_chain(t.right)


def chain_leaves(t) -> list[Term]:
    if isinstance(t, LeftMerge):
        return chain_leaves(t.left) + chain_leaves(t.right)
    return [t]


def chain_label(t) -> tuple:
    return tuple(sorted(TAU if isinstance(x, Tau) else x.name for x in chain_leaves(t)))


def make_chain(names) -> Term:
    leaves = sorted((TAU_T if n == TAU else Atom(n) for n in names), key=term_key)
    acc = leaves[-1]
    for x in reversed(leaves[:-1]):
        acc = LeftMerge(x, acc)
    return acc


def _kind_ok(kind, v) -> bool:
    if kind == "term":
        return isinstance(v, Term)
    if kind == "chain":
        return is_chain(v)
    if kind == "guard":
        return isinstance(v, GuardExpr)
    if kind == "prob":
        return isinstance(v, Fraction)
    if kind == "set":
        return isinstance(v, frozenset)
    if kind == "nat":
        return isinstance(v, int)
    raise ValueError(kind)


def match(p, t, b: dict):
    if isinstance(p, M):
        if not _kind_ok(p.kind, t):
            return None
        if p.name in b:
            return b if b[p.name] == t else None
        b = dict(b)
        b[p.name] = t
        return b
    if isinstance(p, tuple):
        if type(t) is not p[0]:
            return None
        for pa, ta in zip(p[1:], t._args):
            b = match(pa, ta, b)
            if b is None:
                return None
        return b
    return b if p == t else None


def instantiate(p, b: dict, rw):
    if isinstance(p, M):
        return b[p.name]
    if isinstance(p, Fn):
        return p.f(b, rw)
    if isinstance(p, tuple):
        return p[0](*(instantiate(a, b, rw) for a in p[1:]))
    return p


_SYM = {Seq: "·", Alt: "+", Whole: "≬", Par: "∥", LeftMerge: "⌊⌊", Comm: "|", Unless: "◁",
        SeqG: "·", PlusG: "+", LeftMergeG: "⌊⌊"}


def show_pattern(p) -> str:
    if isinstance(p, (M, Fn)):
        return repr(p)
    if isinstance(p, tuple):
        cls, args = p[0], p[1:]
        if cls in _SYM:
            return f"({show_pattern(args[0])}{_SYM[cls]}{show_pattern(args[1])})"
        if cls in (ProbAlt, ProbG):
            return f"({show_pattern(args[0])}⊞{show_pattern(args[1])} {show_pattern(args[2])})"
        if cls is GuardAtom:
            return show_pattern(args[0])
        if cls is NotG:
            return "¬" + show_pattern(args[0])
        if cls is ConflictElim:
            return f"Θ({show_pattern(args[0])})"
        if cls is Encap:
            return f"∂_{show_pattern(args[0])}({show_pattern(args[1])})"
        if cls is Hide:
            return f"τ_{show_pattern(args[0])}({show_pattern(args[1])})"
        if cls is Project:
            return f"Π_{show_pattern(args[0])}({show_pattern(args[1])})"
        return f"{cls.__name__}({', '.join(show_pattern(a) for a in args)})"
    if p is DELTA:
        return "δ"
    if p is EPS:
        return "ε"
    if p is TAU_T:
        return "τ"
    return repr(p)


@dataclass(frozen=True)
class Rule:
    name: str
    lhs: object
    rhs: object
    when: Callable | None = None
    label: Callable | None = None   # optional dynamic name, e.g. U1 vs U3

    def schema(self) -> str:
        return f"{show_pattern(self.lhs)} → {show_pattern(self.rhs)}"


# ---------------------------------------------------------------------------
# rule table

x, y, z = M("x"), M("y"), M("z")
e1, e2 = M("e1", "chain"), M("e2", "chain")
phi, psi = M("phi", "guard"), M("psi", "guard")
p_, H, N_ = M("p", "prob"), M("H", "set"), M("n", "nat")
Gphi, Gpsi = (GuardAtom, phi), (GuardAtom, psi)
Gnphi = (GuardAtom, (NotG, phi))


def _pf(*names):
    return lambda b, rw: all(prob_free(b[n]) for n in names)


def _pf_gf(*names):
    return lambda b, rw: all(prob_free(b[n]) and not has_guards(b[n]) for n in names)


def _gf(*names):
    return lambda b, rw: all(not has_guards(b[n]) for n in names)


def _compat(b, rw):
    return rw.sem.compatible(chain_label(b["e1"]), chain_label(b["e2"]))


def _incompat(b, rw):
    return not _compat(b, rw)


_chain12 = Fn(lambda b, rw: make_chain(chain_label(b["e1"]) + chain_label(b["e2"])), "(e1⌊⌊e2)")


def _gamma_sum(tail):
    def f(b, rw):
        labs = rw.sem._matchings(chain_label(b["e1"]), chain_label(b["e2"]))
        if not labs:
            return DELTA
        rest = tail(b)
        return alt_of(make_chain(l) if rest is None else Seq(make_chain(l), rest) for l in labs)
    return f


def _chain_ok(b, rw):
    if not _compat(b, rw):
        return True
    return make_chain(chain_label(b["e1"]) + chain_label(b["e2"])) != LeftMerge(b["e1"], b["e2"])


def _chain_rhs(b, rw):
    if not _compat(b, rw):
        return DELTA
    return make_chain(chain_label(b["e1"]) + chain_label(b["e2"]))


def _ra4_ok(b, rw):
    # distributing over two terminating summands would resolve z twice
    return not (may_terminate(b["x"]) and may_terminate(b["y"]) and not prob_free(b["z"]))


def _rp4_ok(b, rw):
    return prob_free(b["x"]) and prob_free(b["y"]) and not rw.alg.races


def _unless_atoms(b, rw):
    a, c = b["e1"], b["e2"]
    if isinstance(a, Tau):
        return a
    if isinstance(c, Tau):
        return a
    return TAU_T if rw.alg.eliminated(a.name, (c.name,)) else a


def _unless_name(b, rw):
    a, c = b["e1"], b["e2"]
    if isinstance(a, Tau) or isinstance(c, Tau):
        return "U-tau"
    alg = rw.alg
    if alg.conflict(a.name, c.name):
        return "U1"
    if alg.pconflict(a.name, c.name):
        return "PU1"
    if alg.eliminated(a.name, (c.name,)):
        for pair in alg.conflicts | alg.prob_conflicts:
            if c.name in pair:
                return "U3" if pair in alg.conflicts else "PU3"
        return "U3"
    for pair in alg.conflicts | alg.prob_conflicts:
        if a.name in pair:
            (other,) = pair - {a.name}
            if alg.leq(other, c.name):
                return "U2" if pair in alg.conflicts else "PU2"
    return "U0"


def _is_single(name):
    return lambda b, rw: isinstance(b[name], (Atom, Tau))


def _d_name(b, rw):
    return "D2" if b["e1"].name in b["H"] else "D1"


def _ti_name(b, rw):
    return "TI2" if b["e1"].name in b["H"] else "TI1"


def _wp_rule(b, rw):
    env = rw.env
    e = b["e1"]
    if env is None or not isinstance(e, Atom):
        return None
    try:
        wp = weakest_precondition(e.name, b["psi"], env)
        pre = satisfying(b["phi"], env)
        if pre == satisfying(wp, env):
            return "RG10"
        neg = weakest_precondition(e.name, NotG(b["psi"]), env)
        det = all(len(env.effect(e.name, s)) == 1 for s in env.states)
        if det and pre == frozenset(env.states) - satisfying(neg, env):
            return "RG11"
    except UnknownGuardAtom:
        return None
    return None


RULES: dict = {
    Seq: [
        Rule("RA7", (Seq, DELTA, x), DELTA),
        Rule("RA8", (Seq, EPS, x), x),
        Rule("RA9", (Seq, x, EPS), x),
        Rule("RG1", (Seq, Gphi, Gnphi), DELTA),
        Rule("RG3", (Seq, Gphi, DELTA), DELTA),
        Rule("GM.", (Seq, Gphi, Gpsi), (GuardAtom, (SeqG, phi, psi))),
        Rule("GM.", (Seq, Gphi, (Seq, Gpsi, x)), (Seq, (GuardAtom, (SeqG, phi, psi)), x)),
        Rule("RG10", (Seq, Gphi, (Seq, e1, Gpsi)), (Seq, Gphi, e1),
             when=lambda b, rw: _wp_rule(b, rw) is not None, label=_wp_rule),
        Rule("RG10", (Seq, Gphi, (Seq, e1, (Seq, Gpsi, x))), (Seq, Gphi, (Seq, e1, x)),
             when=lambda b, rw: _wp_rule(b, rw) is not None, label=_wp_rule),
        Rule("RA5", (Seq, (Seq, x, y), z), (Seq, x, (Seq, y, z))),
        Rule("RPA4", (Seq, (ProbAlt, x, p_, y), z), (ProbAlt, (Seq, x, z), p_, (Seq, y, z))),
        Rule("RA4", (Seq, (Alt, x, y), z), (Alt, (Seq, x, z), (Seq, y, z)), when=_ra4_ok),
        Rule("RG4", (Seq, Gphi, (Alt, x, y)), (Alt, (Seq, Gphi, x), (Seq, Gphi, y))),
        Rule("RPG2", (Seq, Gphi, (ProbAlt, x, p_, y)), (ProbAlt, (Seq, Gphi, x), p_, (Seq, Gphi, y))),
    ],
    Alt: [
        Rule("RA6", (Alt, DELTA, x), x),
        Rule("RA3", (Alt, x, x), x, when=_pf("x")),
        Rule("RA3", (Alt, x, (Alt, x, y)), (Alt, x, y), when=_pf("x")),
        Rule("RG2", (Alt, Gphi, Gnphi), EPS),
        Rule("RPA5", (Alt, (ProbAlt, x, p_, y), z), (ProbAlt, (Alt, x, z), p_, (Alt, y, z))),
        Rule("RPA5", (Alt, z, (ProbAlt, x, p_, y)), (ProbAlt, (Alt, z, x), p_, (Alt, z, y))),
    ],
    Whole: [
        Rule("PMW2", (Whole, (ProbAlt, x, p_, y), z), (ProbAlt, (Whole, x, z), p_, (Whole, y, z))),
        Rule("PMW1", (Whole, x, (ProbAlt, y, p_, z)), (ProbAlt, (Whole, x, y), p_, (Whole, x, z))),
        Rule("RP1", (Whole, x, y), (Alt, (Par, x, y), (Comm, x, y)), when=_pf("x", "y")),
    ],
    Par: [
        Rule("RPM2", (Par, (ProbAlt, x, p_, y), z), (ProbAlt, (Par, x, z), p_, (Par, y, z))),
        Rule("RPM1", (Par, x, (ProbAlt, y, p_, z)), (ProbAlt, (Par, x, y), p_, (Par, x, z))),
        Rule("RP4", (Par, x, y), (Alt, (LeftMerge, x, y), (LeftMerge, y, x)), when=_rp4_ok),
    ],
    LeftMerge: [
        Rule("RP9", (LeftMerge, DELTA, x), DELTA),
        Rule("RP9r", (LeftMerge, x, DELTA), DELTA),
        Rule("RP10", (LeftMerge, EPS, x), x),
        Rule("RP11", (LeftMerge, x, EPS), x),
        Rule("LMG1", (LeftMerge, Gphi, x), (Seq, Gphi, x)),
        Rule("LMG2", (LeftMerge, x, Gphi), (Seq, Gphi, x)),
        Rule("LMG3", (LeftMerge, (Seq, Gphi, x), y), (Seq, Gphi, (LeftMerge, x, y))),
        Rule("LMG4", (LeftMerge, x, (Seq, Gphi, y)), (Seq, Gphi, (LeftMerge, x, y))),
        Rule("PML2", (LeftMerge, (ProbAlt, x, p_, y), z), (ProbAlt, (LeftMerge, x, z), p_, (LeftMerge, y, z))),
        Rule("PML1", (LeftMerge, x, (ProbAlt, y, p_, z)), (ProbAlt, (LeftMerge, x, y), p_, (LeftMerge, x, z))),
        Rule("RP8", (LeftMerge, (Alt, x, y), z), (Alt, (LeftMerge, x, z), (LeftMerge, y, z)), when=_pf("z")),
        Rule("RP8r", (LeftMerge, x, (Alt, y, z)), (Alt, (LeftMerge, x, y), (LeftMerge, x, z)), when=_pf("x")),
        Rule("RPC", (LeftMerge, e1, e2), Fn(_chain_rhs, "chain(e1,e2)"), when=_chain_ok),
        Rule("RP5", (LeftMerge, e1, (Seq, e2, y)), (Seq, _chain12, y), when=_compat),
        Rule("RP6", (LeftMerge, (Seq, e1, x), e2), (Seq, _chain12, x), when=_compat),
        Rule("RP7", (LeftMerge, (Seq, e1, x), (Seq, e2, y)), (Seq, _chain12, (Whole, x, y)), when=_compat),
        Rule("LMD", (LeftMerge, e1, (Seq, e2, y)), DELTA, when=_incompat),
        Rule("LMD", (LeftMerge, (Seq, e1, x), e2), DELTA, when=_incompat),
        Rule("LMD", (LeftMerge, (Seq, e1, x), (Seq, e2, y)), DELTA, when=_incompat),
    ],
    Comm: [
        Rule("C7", (Comm, DELTA, x), DELTA),
        Rule("C8", (Comm, x, DELTA), DELTA),
        Rule("C9", (Comm, EPS, x), DELTA),
        Rule("C10", (Comm, x, EPS), DELTA),
        Rule("CG1", (Comm, Gphi, x), DELTA),
        Rule("CG2", (Comm, x, Gphi), DELTA),
        Rule("CG3", (Comm, (Seq, Gphi, x), y), (Seq, Gphi, (Comm, x, y))),
        Rule("CG4", (Comm, x, (Seq, Gphi, y)), (Seq, Gphi, (Comm, x, y))),
        Rule("PM4", (Comm, (ProbAlt, x, p_, y), z), (ProbAlt, (Comm, x, z), p_, (Comm, y, z))),
        Rule("PM3", (Comm, x, (ProbAlt, y, p_, z)), (ProbAlt, (Comm, x, y), p_, (Comm, x, z))),
        Rule("C5", (Comm, (Alt, x, y), z), (Alt, (Comm, x, z), (Comm, y, z)), when=_pf("z")),
        Rule("C6", (Comm, x, (Alt, y, z)), (Alt, (Comm, x, y), (Comm, x, z)), when=_pf("x")),
        Rule("C1", (Comm, e1, e2), Fn(_gamma_sum(lambda b: None), "Σγ(e1,e2)")),
        Rule("C2", (Comm, e1, (Seq, e2, y)), Fn(_gamma_sum(lambda b: b["y"]), "Σγ(e1,e2)·y")),
        Rule("C3", (Comm, (Seq, e1, x), e2), Fn(_gamma_sum(lambda b: b["x"]), "Σγ(e1,e2)·x")),
        Rule("C4", (Comm, (Seq, e1, x), (Seq, e2, y)),
             Fn(_gamma_sum(lambda b: Whole(b["x"], b["y"])), "Σγ(e1,e2)·(x≬y)")),
    ],
    ConflictElim: [
        Rule("CE1", (ConflictElim, e1), e1, when=_is_single("e1")),
        Rule("CE2", (ConflictElim, DELTA), DELTA),
        Rule("CE3", (ConflictElim, EPS), EPS),
        Rule("G22", (ConflictElim, Gphi), Gphi),
        Rule("PCE1", (ConflictElim, (ProbAlt, x, p_, y)),
             (ProbAlt, (Unless, (ConflictElim, x), y), p_, (Unless, (ConflictElim, y), x)), when=_gf("x", "y")),
        Rule("CE4", (ConflictElim, (Alt, x, y)),
             (Alt, (Unless, (ConflictElim, x), y), (Unless, (ConflictElim, y), x)), when=_pf_gf("x", "y")),
        Rule("CE5", (ConflictElim, (Seq, x, y)), (Seq, (ConflictElim, x), (ConflictElim, y)),
             when=lambda b, rw: not may_terminate(b["x"])),
        Rule("CE6", (ConflictElim, (LeftMerge, x, y)),
             (Alt, (LeftMerge, (Unless, (ConflictElim, x), y), y),
              (LeftMerge, (Unless, (ConflictElim, y), x), x)), when=_pf_gf("x", "y")),
        Rule("CE7", (ConflictElim, (Comm, x, y)),
             (Alt, (Comm, (Unless, (ConflictElim, x), y), y),
              (Comm, (Unless, (ConflictElim, y), x), x)), when=_pf_gf("x", "y")),
    ],
    Unless: [
        Rule("U5", (Unless, DELTA, x), DELTA),
        Rule("U7", (Unless, EPS, x), EPS),
        Rule("U-tau", (Unless, TAU_T, x), TAU_T),
        Rule("U-guard", (Unless, Gphi, x), Gphi),
        Rule("U8", (Unless, (Alt, x, y), z), (Alt, (Unless, x, z), (Unless, y, z))),
        Rule("PU4", (Unless, (ProbAlt, x, p_, y), z), (ProbAlt, (Unless, x, z), p_, (Unless, y, z))),
        Rule("U9", (Unless, (Seq, x, y), z), (Seq, (Unless, x, z), (Unless, y, z))),
        Rule("U10", (Unless, (LeftMerge, x, y), z), (LeftMerge, (Unless, x, z), (Unless, y, z))),
        Rule("U11", (Unless, (Comm, x, y), z), (Comm, (Unless, x, z), (Unless, y, z))),
        Rule("U4", (Unless, x, DELTA), x),
        Rule("U6", (Unless, x, EPS), x),
        Rule("U-tau", (Unless, x, TAU_T), x),
        Rule("U-guard", (Unless, x, Gphi), x),
        Rule("U12", (Unless, x, (Alt, y, z)), (Unless, (Unless, x, y), z)),
        Rule("PU5", (Unless, x, (ProbAlt, y, p_, z)), (Unless, (Unless, x, y), z)),
        Rule("U13", (Unless, x, (Seq, y, z)), (Unless, (Unless, x, y), z)),
        Rule("U14", (Unless, x, (LeftMerge, y, z)), (Unless, (Unless, x, y), z)),
        Rule("U15", (Unless, x, (Comm, y, z)), (Unless, (Unless, x, y), z)),
        Rule("UX", (Unless, x, (Whole, y, z)), (Unless, (Unless, x, y), z)),
        Rule("UX", (Unless, x, (Par, y, z)), (Unless, (Unless, x, y), z)),
        Rule("UX", (Unless, x, (ConflictElim, y)), (Unless, x, y)),
        Rule("UX", (Unless, x, (Encap, H, y)), (Unless, x, y)),
        Rule("UX", (Unless, x, (Hide, H, y)), (Unless, x, y)),
        Rule("UX", (Unless, x, (Project, N_, y)), (Unless, x, y)),
        Rule("UX", (Unless, x, (Unless, y, z)), (Unless, x, y)),
        Rule("U1", (Unless, e1, e2), Fn(_unless_atoms, "e1 or τ"),
             when=lambda b, rw: _is_single("e1")(b, rw) and _is_single("e2")(b, rw), label=_unless_name),
    ],
    Encap: [
        Rule("D1", (Encap, H, e1), Fn(lambda b, rw: DELTA if b["e1"].name in b["H"] else b["e1"], "e1 or δ"),
             when=lambda b, rw: isinstance(b["e1"], Atom), label=_d_name),
        Rule("D-tau", (Encap, H, TAU_T), TAU_T),
        Rule("D3", (Encap, H, DELTA), DELTA),
        Rule("D-eps", (Encap, H, EPS), EPS),
        Rule("G23", (Encap, H, Gphi), Gphi),
        Rule("D4", (Encap, H, (Alt, x, y)), (Alt, (Encap, H, x), (Encap, H, y))),
        Rule("PD1", (Encap, H, (ProbAlt, x, p_, y)), (ProbAlt, (Encap, H, x), p_, (Encap, H, y))),
        Rule("D5", (Encap, H, (Seq, x, y)), (Seq, (Encap, H, x), (Encap, H, y))),
        Rule("D6", (Encap, H, (LeftMerge, x, y)), (LeftMerge, (Encap, H, x), (Encap, H, y))),
    ],
    Hide: [
        Rule("TI1", (Hide, H, e1), Fn(lambda b, rw: TAU_T if b["e1"].name in b["H"] else b["e1"], "e1 or τ"),
             when=lambda b, rw: isinstance(b["e1"], Atom), label=_ti_name),
        Rule("TI-tau", (Hide, H, TAU_T), TAU_T),
        Rule("TI3", (Hide, H, DELTA), DELTA),
        Rule("TI-eps", (Hide, H, EPS), EPS),
        Rule("G28", (Hide, H, Gphi), Gphi),
        Rule("TI4", (Hide, H, (Alt, x, y)), (Alt, (Hide, H, x), (Hide, H, y))),
        Rule("PTI1", (Hide, H, (ProbAlt, x, p_, y)), (ProbAlt, (Hide, H, x), p_, (Hide, H, y))),
        Rule("TI5", (Hide, H, (Seq, x, y)), (Seq, (Hide, H, x), (Hide, H, y))),
        Rule("TI6", (Hide, H, (LeftMerge, x, y)), (LeftMerge, (Hide, H, x), (Hide, H, y))),
    ],
    Project: [
        Rule("PR5", (Project, N_, x), DELTA, when=lambda b, rw: b["n"] == 0),
        Rule("PR6", (Project, N_, DELTA), DELTA),
        Rule("PR-eps", (Project, N_, EPS), EPS),
        Rule("PR-guard", (Project, N_, Gphi), Gphi),
        Rule("PR3", (Project, N_, e1), e1),
        Rule("PR4", (Project, N_, (Seq, e1, x)),
             (Seq, e1, (Project, Fn(lambda b, rw: b["n"] - 1, "n-1"), x))),
        Rule("PR-guard", (Project, N_, (Seq, Gphi, x)), (Seq, Gphi, (Project, N_, x))),
        Rule("PR1", (Project, N_, (Alt, x, y)), (Alt, (Project, N_, x), (Project, N_, y))),
        Rule("PPR1", (Project, N_, (ProbAlt, x, p_, y)), (ProbAlt, (Project, N_, x), p_, (Project, N_, y))),
        Rule("PR2", (Project, N_, (LeftMerge, x, y)), (LeftMerge, (Project, N_, x), (Project, N_, y))),
    ],
}

ALL_RULES = [r for rs in RULES.values() for r in rs]


# ---------------------------------------------------------------------------
# procedural steps: AC of +, chains of probabilistic choice, guard algebra

def prob_leaves(t: Term, w=Fraction(1)) -> list:
    if isinstance(t, ProbAlt):
        return prob_leaves(t.left, w * t.prob) + prob_leaves(t.right, w * (1 - t.prob))
    return [(t, w)]


def leaf_distribution(t: Term) -> dict:
    out: dict = {}
    for leaf, w in prob_leaves(t):
        out[leaf] = out.get(leaf, 0) + w
    return out


def prob_chain(dist: dict) -> Term:
    """Left-nested choice over the leaves in term order, weights preserved."""
    items = sorted(dist.items(), key=lambda kv: term_key(kv[0]))
    acc, total = items[0]
    for leaf, w in items[1:]:
        new_total = total + w
        acc = ProbAlt(acc, total / new_total, leaf)
        total = new_total
    return acc


def _pa_name(t: Term, dist: dict) -> str:
    leaves = [l for l, _ in prob_leaves(t)]
    if len(set(leaves)) < len(leaves):
        return "RPA3"
    if leaves != sorted(leaves, key=term_key):
        return "RPA1"
    return "RPA2"


def _conj(g):
    if isinstance(g, (SeqG, LeftMergeG)):
        return _conj(g.left) + _conj(g.right)
    return [g]


def _disj(g):
    if isinstance(g, (PlusG, ProbG)):
        return _disj(g.left) + _disj(g.right)
    return [g]


def _nest(items, op):
    acc = items[-1]
    for g in reversed(items[:-1]):
        acc = op(g, acc)
    return acc


def simplify_guard(g: GuardExpr) -> GuardExpr:
    """Boolean simplification: double negation, units, complements, idempotence."""
    if isinstance(g, NotG):
        a = simplify_guard(g.arg)
        if isinstance(a, NotG):
            return a.arg
        if isinstance(a, EpsG):
            return DeltaG()
        if isinstance(a, DeltaG):
            return EpsG()
        return NotG(a)
    if isinstance(g, (SeqG, LeftMergeG)):
        parts = []
        for c in (simplify_guard(g.left), simplify_guard(g.right)):
            parts.extend(_conj(c))
        return _combine(parts, unit=EpsG, zero=DeltaG, op=SeqG)
    if isinstance(g, (PlusG, ProbG)):
        parts = []
        for c in (simplify_guard(g.left), simplify_guard(g.right)):
            parts.extend(_disj(c))
        return _combine(parts, unit=DeltaG, zero=EpsG, op=PlusG)
    if isinstance(g, WpG):
        return WpG(g.event, simplify_guard(g.post))
    return g


def _combine(parts, unit, zero, op):
    if any(isinstance(q, zero) for q in parts):
        return zero()
    items = sorted({q for q in parts if not isinstance(q, unit)}, key=guard_key)
    present = set(items)
    if any(isinstance(q, NotG) and q.arg in present for q in items):
        return zero()
    if not items:
        return unit()
    return _nest(items, op)


# ---------------------------------------------------------------------------
# traces

@dataclass(frozen=True)
class TraceStep:
    rule: str
    path: tuple
    before: Term
    after: Term


def path_str(path: tuple) -> str:
    return ".".join(map(str, path)) if path else "ε"


@dataclass
class RewriteTrace:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def export(self) -> str:
        from .parser import pretty_print
        return "\n".join(f"{s.rule} @ {path_str(s.path)} : {pretty_print(s.before)} ==> {pretty_print(s.after)}"
                         for s in self.steps)

    def replay(self, start: Term) -> Term:
        cur = start
        for s in self.steps:
            cur = replace_at(cur, s.path, s.before, s.after)
        return cur

    def rules_used(self) -> set:
        return {s.rule for s in self.steps}


def subterm_at(t: Term, path: tuple) -> Term:
    for i in path:
        t = children(t)[i]
    return t


def replace_at(t: Term, path: tuple, before: Term, after: Term) -> Term:
    if not path:
        if t is not before:
            raise TermError("trace replay mismatch")
        return after
    kids = list(children(t))
    kids[path[0]] = replace_at(kids[path[0]], path[1:], before, after)
    return rebuild(t, kids)


# ---------------------------------------------------------------------------
# the rewriter

class Rewriter:
    def __init__(self, algebra: AlgebraDecl = EMPTY_ALGEBRA, env: DataEnv | None = None,
                 spec: RecSpec | None = None, limits: Limits = DEFAULT_LIMITS,
                 project_mode: bool = False, record: bool = True):
        from .semantics import Semantics
        self.alg = algebra
        self.env = env
        self.spec = spec or EMPTY_SPEC
        self.limits = limits
        self.lazy = project_mode
        self.record = record
        self.sem = Semantics(algebra, self.spec, env, limits)
        self._memo: dict = {}
        self._count = 0

    def normalize(self, t: Term) -> tuple[Term, RewriteTrace]:
        if not self.lazy:
            for sub in _iter_subterms(t):
                if isinstance(sub, RecVar):
                    raise NotClosed(sub.name)
        self._count = 0
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old, 20000))
        try:
            nf, steps = self._norm(t)
        finally:
            sys.setrecursionlimit(old)
        return nf, RewriteTrace(list(steps) if steps is not None else [])

    def _tick(self):
        self._count += 1
        if self._count > self.limits.step_limit:
            raise StepLimitExceeded(self.limits.step_limit)

    def _norm_positions(self, t: Term) -> tuple:
        kids = children(t)
        if self.lazy and isinstance(t, Seq) and not (isinstance(t.right, Project) or _closed(t.right)):
            return (0,)
        return tuple(range(len(kids)))

    def _norm(self, t: Term):
        hit = self._memo.get(t)
        if hit is not None:
            return hit
        steps = [] if self.record else None
        cur = t
        while True:
            kids = list(children(cur))
            changed = False
            for i in self._norm_positions(cur):
                nk, ks = self._norm(kids[i])
                if nk is not kids[i]:
                    if steps is not None:
                        steps.extend(TraceStep(s.rule, (i,) + s.path, s.before, s.after) for s in ks)
                    kids[i] = nk
                    changed = True
            if changed:
                cur = rebuild(cur, kids)
            fired = self._root_step(cur)
            if fired is None:
                break
            name, new = fired
            self._tick()
            if steps is not None:
                steps.append(TraceStep(name, (), cur, new))
            cur = new
        out = (cur, steps)
        self._memo[t] = out
        if cur is not t:
            self._memo.setdefault(cur, (cur, [] if self.record else None))
        return out

    def _root_step(self, t: Term):
        cls = type(t)
        if cls is Alt:
            canon = alt_of(summands(t))
            if canon is not t:
                return "RA1/RA2", canon
            merged = self._merge_guards(t)
            if merged is not None:
                return "GM+", merged
        elif cls is ProbAlt:
            dist = leaf_distribution(t)
            canon = prob_chain(dist)
            if canon is not t:
                return _pa_name(t, dist), canon
        elif cls is GuardAtom:
            g = simplify_guard(t.guard)
            if g is not t.guard:
                return "GBOOL", GuardAtom(g)
            if isinstance(g, EpsG):
                return "G-eps", EPS
            if isinstance(g, DeltaG):
                return "G-delta", DELTA
            if self.env is not None:
                try:
                    sat = satisfying(g, self.env)
                except UnknownGuardAtom:
                    sat = None
                if sat is not None and sat == frozenset(self.env.states):
                    return "RG8", EPS
                if sat is not None and not sat:
                    return "RG9", DELTA
        elif cls is RecVar:
            if self.lazy:
                return "RDP", self.spec.body(t.name)
            raise NotClosed(t.name)
        for rule in RULES.get(cls, ()):
            b = match(rule.lhs, t, {})
            if b is None:
                continue
            if rule.when is not None and not rule.when(b, self):
                continue
            new = instantiate(rule.rhs, b, self)
            if new is t:
                continue
            name = rule.label(b, self) if rule.label else rule.name
            return name, new
        return None

    @staticmethod
    def _merge_guards(t: Term):
        parts = summands(t)
        guards = [s for s in parts if isinstance(s, GuardAtom) or s is EPS]
        if len(guards) < 2:
            return None
        g = _nest([EpsG() if s is EPS else s.guard for s in guards], PlusG)
        rest = [s for s in parts if not (isinstance(s, GuardAtom) or s is EPS)]
        return alt_of(rest + [GuardAtom(g)])


def _closed(t) -> bool:
    return not any(isinstance(u, RecVar) for u in _iter_subterms(t))


def _iter_subterms(t):
    stack = [t]
    while stack:
        u = stack.pop()
        yield u
        stack.extend(children(u))


# ---------------------------------------------------------------------------
# public API

def normalize(t: Term, algebra: AlgebraDecl = EMPTY_ALGEBRA, env: DataEnv | None = None,
              limits: Limits = DEFAULT_LIMITS, record: bool = True) -> tuple[Term, RewriteTrace]:
    return Rewriter(algebra, env, limits=limits, record=record).normalize(t)


def project_rewrite(t: Term, n: int, algebra: AlgebraDecl = EMPTY_ALGEBRA,
                    spec: RecSpec | None = None, env: DataEnv | None = None,
                    limits: Limits = DEFAULT_LIMITS) -> Term:
    """The projection-free basic term equal to the depth-n projection of t."""
    rw = Rewriter(algebra, env, spec, limits, project_mode=True, record=False)
    nf, _ = rw.normalize(Project(n, t))
    return nf


def is_basic_term(t: Term) -> bool:
    if isinstance(t, (Atom, Tau, Delta, Epsilon, GuardAtom)):
        return True
    if is_chain(t):
        return True
    if isinstance(t, Seq):
        return (is_chain(t.left) or isinstance(t.left, GuardAtom)) and is_basic_term(t.right)
    if isinstance(t, (Alt, ProbAlt, LeftMerge)):
        return is_basic_term(t.left) and is_basic_term(t.right)
    return False


# ---------------------------------------------------------------------------
# trace audit

def _guard_vars(g, acc):
    if isinstance(g, (AtomGuard, WpG, StateSetG)):
        acc.add(g)
    else:
        for a in g._args:
            if isinstance(a, GuardExpr):
                _guard_vars(a, acc)
    return acc


def _bool_eval(g, val):
    if isinstance(g, (AtomGuard, WpG, StateSetG)):
        return val[g]
    if isinstance(g, NotG):
        return not _bool_eval(g.arg, val)
    if isinstance(g, (PlusG, ProbG)):
        return _bool_eval(g.left, val) or _bool_eval(g.right, val)
    if isinstance(g, (SeqG, LeftMergeG)):
        return _bool_eval(g.left, val) and _bool_eval(g.right, val)
    return isinstance(g, EpsG)


def guards_equivalent(g1, g2) -> bool:
    """Propositional equivalence, treating atoms and opaque guards as variables."""
    vs = sorted(_guard_vars(g1, set()) | _guard_vars(g2, set()), key=guard_key)
    for bits in product((False, True), repeat=len(vs)):
        val = dict(zip(vs, bits))
        if _bool_eval(g1, val) != _bool_eval(g2, val):
            return False
    return True


def _as_guard(t):
    if t is EPS:
        return EpsG()
    if t is DELTA:
        return DeltaG()
    return t.guard if isinstance(t, GuardAtom) else None


def audit_step(step: TraceStep, rw: Rewriter) -> bool:
    """Whether a recorded step is an instance of the rule it names."""
    b, a = step.before, step.after
    name = step.rule
    if name == "RA1/RA2":
        return isinstance(b, Alt) and sorted(map(term_key, summands(b))) == sorted(map(term_key, summands(a)))
    if name in ("RPA1", "RPA2", "RPA3"):
        return isinstance(b, ProbAlt) and leaf_distribution(b) == leaf_distribution(prob_chain(leaf_distribution(a)))
    if name in ("GBOOL", "G-eps", "G-delta"):
        ga = _as_guard(a)
        return isinstance(b, GuardAtom) and ga is not None and guards_equivalent(b.guard, ga)
    if name == "GM+":
        bs, as_ = summands(b), summands(a)
        is_g = lambda s: isinstance(s, GuardAtom) or s is EPS
        rest_b = sorted(term_key(s) for s in bs if not is_g(s))
        rest_a = sorted(term_key(s) for s in as_ if not is_g(s))
        ga = [s for s in as_ if is_g(s)]
        gb = _nest([_as_guard(s) for s in bs if is_g(s)], PlusG)
        return rest_a == rest_b and len(ga) == 1 and guards_equivalent(gb, _as_guard(ga[0]))
    if name in ("RG8", "RG9"):
        if rw.env is None or not isinstance(b, GuardAtom):
            return False
        sat = satisfying(b.guard, rw.env)
        return (a is EPS and sat == frozenset(rw.env.states)) if name == "RG8" else (a is DELTA and not sat)
    if name == "RDP":
        return isinstance(b, RecVar) and rw.spec.body(b.name) is a
    for rule in ALL_RULES:
        bind = match(rule.lhs, b, {})
        if bind is None or (rule.when is not None and not rule.when(bind, rw)):
            continue
        got = rule.label(bind, rw) if rule.label else rule.name
        if got == name and instantiate(rule.rhs, bind, rw) is a:
            return True
    return False


def audit_trace(trace: RewriteTrace, rw: Rewriter) -> list[TraceStep]:
    """Steps that do not match their rule schema (empty when the trace is sound)."""
    return [s for s in trace.steps if not audit_step(s, rw)]


def rule_schemas() -> list[tuple[str, str]]:
    return [(r.name, r.schema()) for r in ALL_RULES]
