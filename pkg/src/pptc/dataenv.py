"""Finite data environments: guard tests, event effects and weakest preconditions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .terms import (
    AtomGuard, DeltaG, EpsG, GuardExpr, LeftMergeG, NotG, PlusG, ProbG, SeqG,
    StateSetG, TAU, TermError, WpG, guard_atoms,
)


class UnknownGuardAtom(TermError):
    def __init__(self, name):
        super().__init__(f"guard atom {name} has no test table")
        self.name = name


class DataEnvError(TermError):
    pass


@dataclass(eq=False)
class DataEnv:
    """A finite set of data states with test and effect tables.

    ``tests`` maps an atomic guard to the set of states where it holds.
    ``effects`` maps (event, state) to the nonempty set of successor states;
    unlisted pairs leave the state unchanged.
    """
    states: tuple
    tests: Mapping[str, frozenset] = field(default_factory=dict)
    effects: Mapping[tuple, frozenset] = field(default_factory=dict)
    initial: str | None = None

    def __post_init__(self):
        self.states = tuple(self.states)
        if not self.states:
            raise DataEnvError("a data environment needs at least one state")
        known = set(self.states)
        self.tests = {a: frozenset(ss) for a, ss in self.tests.items()}
        self.effects = {k: frozenset(v) for k, v in self.effects.items()}
        for a, ss in self.tests.items():
            if not ss <= known:
                raise DataEnvError(f"test {a} mentions unknown states {sorted(ss - known)}")
        for (e, s), succ in self.effects.items():
            if s not in known or not succ or not succ <= known:
                raise DataEnvError(f"bad effect entry for {e} at {s}")
        if self.initial is None:
            self.initial = self.states[0]
        elif self.initial not in known:
            raise DataEnvError(f"unknown initial state {self.initial}")

    @property
    def atoms(self) -> list[str]:
        return sorted(self.tests)

    def test(self, atom: str, s) -> bool:
        try:
            return s in self.tests[atom]
        except KeyError:
            raise UnknownGuardAtom(atom) from None

    def effect(self, event: str, s) -> frozenset:
        if event == TAU:
            return frozenset((s,))
        return self.effects.get((event, s), frozenset((s,)))

    def step_effect(self, events: Iterable[str], s) -> frozenset:
        """Successor states of a step: the union of the member events' effects."""
        out = set()
        for e in events:
            if e != TAU:
                out |= self.effect(e, s)
        return frozenset(out) if out else frozenset((s,))

    def deterministic(self) -> bool:
        return all(len(v) == 1 for v in self.effects.values())


def eval_guard(g: GuardExpr, s, env: DataEnv) -> bool:
    if isinstance(g, AtomGuard):
        return env.test(g.name, s)
    if isinstance(g, NotG):
        return not eval_guard(g.arg, s, env)
    if isinstance(g, (PlusG, ProbG)):
        return eval_guard(g.left, s, env) or eval_guard(g.right, s, env)
    if isinstance(g, (SeqG, LeftMergeG)):
        return eval_guard(g.left, s, env) and eval_guard(g.right, s, env)
    if isinstance(g, EpsG):
        return True
    if isinstance(g, DeltaG):
        return False
    if isinstance(g, WpG):
        return all(eval_guard(g.post, t, env) for t in env.effect(g.event, s))
    if isinstance(g, StateSetG):
        return s in g.states
    raise TypeError(f"not a guard: {g!r}")


def satisfying(g: GuardExpr, env: DataEnv) -> frozenset:
    return frozenset(s for s in env.states if eval_guard(g, s, env))


def characteristic_guard(states: Iterable, env: DataEnv) -> GuardExpr:
    """A guard holding exactly in `states`, over atoms when the valuation separates them."""
    target = frozenset(states)
    if target == frozenset(env.states):
        return EpsG()
    if not target:
        return DeltaG()
    atoms = env.atoms
    val = {s: tuple(s in env.tests[a] for a in atoms) for s in env.states}
    inside = {val[s] for s in target}
    outside = {val[s] for s in env.states if s not in target}
    if inside & outside:
        return StateSetG(target)
    clauses = []
    for v in sorted(inside):
        lits = [AtomGuard(a) if b else NotG(AtomGuard(a)) for a, b in zip(atoms, v)]
        clause = lits[0]
        for lit in lits[1:]:
            clause = SeqG(clause, lit)
        clauses.append(clause)
    out = clauses[0]
    for c in clauses[1:]:
        out = PlusG(out, c)
    return out


def weakest_precondition(event: str, post: GuardExpr, env: DataEnv) -> GuardExpr:
    good = [s for s in env.states if all(eval_guard(post, t, env) for t in env.effect(event, s))]
    return characteristic_guard(good, env)


def guard_equivalent(g1: GuardExpr, g2: GuardExpr, env: DataEnv) -> bool:
    return satisfying(g1, env) == satisfying(g2, env)


def implies(g1: GuardExpr, g2: GuardExpr, env: DataEnv) -> bool:
    return satisfying(g1, env) <= satisfying(g2, env)


def check_guard_atoms(g: GuardExpr, env: DataEnv) -> None:
    for a in guard_atoms(g):
        if a not in env.tests:
            raise UnknownGuardAtom(a)

