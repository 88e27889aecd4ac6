"""Alternating probabilistic transition systems.

A term is first *resolved*: every probabilistic choice in the part that can
act next is decided, guards are tested against the current data state and
events become breve leaves.  Resolved terms then perform step-labelled
action transitions whose residuals are ordinary terms again.

Resolved terms reuse the ordinary constructors (Alt, Seq, Par, ...) with the
convention that the left operand of Seq and both operands of the parallel
operators are resolved, while Seq continuations are not.  ``Unless`` inside a
resolved term is a renaming wrapper whose right operand is a sum of atoms.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable

from .config import DEFAULT_LIMITS, Limits
from .dataenv import DataEnv, eval_guard
from .terms import (
    DELTA, EMPTY_ALGEBRA, EMPTY_SPEC, EPS, TAU, AlgebraDecl, Alt, Atom, Breve,
    Comm, ConflictElim, Delta, Encap, Epsilon, GuardAtom, Hide, LeftMerge, Par,
    ProbAlt, Project, RecSpec, RecVar, Resolved, Seq, Tau, Term, TermError,
    Unless, Whole, alt_of, canonicalize, event_closure, has_guards, summands, term_key,
)


class UnguardedRecursion(TermError):
    def __init__(self, name):
        super().__init__(f"unfolding of {name} does not reach an action within the unfold bound")
        self.name = name


class StateCapExceeded(TermError):
    def __init__(self, cap):
        super().__init__(f"state space exceeds the cap of {cap} states")
        self.cap = cap


class StepTooLarge(TermError):
    def __init__(self, cap):
        super().__init__(f"a single step would exceed {cap} events")
        self.cap = cap


class MissingDataEnv(TermError):
    def __init__(self):
        super().__init__("term contains guards but no data environment is attached")


B_DELTA = Breve(DELTA)
B_EPS = Breve(EPS)
B_TAU = Breve(Tau())

Label = tuple  # sorted tuple of event names, "tau" for the silent event


def label_str(label: Label) -> str:
    return "{" + ",".join(label) + "}"


def breve(t: Term) -> Term:
    return Breve(t)


def mk_alt(parts: Iterable[Term]) -> Term:
    """Resolved sum: flattened, deduplicated, sorted, with deadlock summands dropped."""
    items = {}
    for p in parts:
        for s in summands(p):
            if s is not B_DELTA:
                items[s] = None
    if not items:
        return B_DELTA
    return alt_of(items)


def _is_chain(r: Term) -> bool:
    if isinstance(r, Breve):
        return isinstance(r.arg, (Atom, Tau))
    return isinstance(r, LeftMerge) and _is_chain(r.left) and _is_chain(r.right)


def _chain_leaves(r: Term) -> list:
    if isinstance(r, LeftMerge):
        return _chain_leaves(r.left) + _chain_leaves(r.right)
    return [r]


def mk_seq(x: Term, z: Term) -> Term:
    if x is B_DELTA:
        return B_DELTA
    return Seq(x, z)


def _tidy(r: Term) -> Term:
    """Strip wrappers that cannot matter on event leaves: theta, encapsulation, hiding."""
    if isinstance(r, ConflictElim) and isinstance(r.arg, Breve):
        return r.arg
    if isinstance(r, (Encap, Hide)) and isinstance(r.arg, Breve):
        x = r.arg.arg
        if isinstance(x, Atom) and x.name in r.events:
            return B_DELTA if isinstance(r, Encap) else B_TAU
        return r.arg
    if isinstance(r, (ConflictElim, Encap, Hide)):
        inner = _tidy(r.arg)
        if inner is r.arg:
            return r
        rebuilt = ConflictElim(inner) if isinstance(r, ConflictElim) else type(r)(r.events, inner)
        return _tidy(rebuilt)
    if isinstance(r, Alt):
        return mk_alt(_tidy(x) for x in summands(r))
    if isinstance(r, Seq):
        return mk_seq(_tidy(r.left), r.right)
    return r


def whole(r1, r2):
    if r1 is None:
        return r2
    if r2 is None:
        return r1
    return Whole(r1, r2)


def atoms_sum(events: Iterable[str]) -> Term:
    names = sorted(e for e in set(events) if e != TAU)
    return alt_of(Atom(e) for e in names) if names else DELTA


def unless(y, events: frozenset):
    """Apply the unless operator against a set of events to an unresolved term."""
    if y is None:
        return None
    events = frozenset(e for e in events if e != TAU)
    if not events:
        return y
    if isinstance(y, Unless) and _is_atom_sum(y.right):
        events = events | _atom_set(y.right)
        y = y.left
    return Unless(y, atoms_sum(events))


def _is_atom_sum(t: Term) -> bool:
    return all(isinstance(s, Atom) for s in summands(t))


def _atom_set(t: Term) -> frozenset:
    return frozenset(s.name for s in summands(t) if isinstance(s, Atom))


@dataclass(frozen=True)
class PState:
    kind: str          # "prob", "resolved" or "terminated"
    term: Term
    data: object = None
    can_terminate: bool = False


@dataclass
class Plts:
    states: list
    prob_edges: dict
    act_edges: dict
    root: int = 0
    algebra: AlgebraDecl = EMPTY_ALGEBRA

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return sum(len(v) for v in self.prob_edges.values()) + sum(len(v) for v in self.act_edges.values())

    def kind(self, i: int) -> str:
        return self.states[i].kind

    def is_acyclic(self) -> bool:
        color = [0] * len(self.states)
        for start in range(len(self.states)):
            if color[start]:
                continue
            stack = [(start, iter(self.successors(start)))]
            color[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                elif color[nxt] == 1:
                    return False
                elif color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(self.successors(nxt))))
        return True

    def successors(self, i: int) -> list[int]:
        return [j for _, j in self.prob_edges.get(i, ())] + [j for _, j in self.act_edges.get(i, ())]

    def check_distributions(self) -> bool:
        for i, st in enumerate(self.states):
            if st.kind == "prob" and sum(w for w, _ in self.prob_edges.get(i, ())) != 1:
                return False
        return True

    def labels(self) -> set:
        return {lab for edges in self.act_edges.values() for lab, _ in edges}

    def export(self) -> str:
        lines = [f"des ({self.root}, {self.n_transitions}, {self.n_states})"]
        for i in range(self.n_states):
            for w, j in self.prob_edges.get(i, ()):
                lines.append(f'({i}, "prob {w}", {j})')
            for lab, j in self.act_edges.get(i, ()):
                lines.append(f'({i}, "{label_str(lab)}", {j})')
        return "\n".join(lines) + "\n"

    def describe(self) -> str:
        from .parser import pretty_print
        out = []
        for i, st in enumerate(self.states):
            data = "" if st.data is None else f" @{st.data}"
            flag = " [term]" if st.can_terminate and st.kind == "resolved" else ""
            out.append(f"{i}: {st.kind}{flag}{data} {pretty_print(st.term)}")
        return "\n".join(out)


class Semantics:
    """Resolution and action steps for one algebra, recursive specification and data environment."""

    def __init__(self, algebra: AlgebraDecl = EMPTY_ALGEBRA, spec: RecSpec = EMPTY_SPEC,
                 env: DataEnv | None = None, limits: Limits = DEFAULT_LIMITS):
        self.alg = algebra
        self.spec = spec
        self.env = env
        self.limits = limits
        self._resolve_cache: dict = {}
        self._steps_cache: dict = {}
        self._term_cache: dict = {}
        self._theta_cache: dict = {}
        self._rename_cache: dict = {}
        self._events_cache: dict = {}
        self._events_busy: set = set()

    # ---- events -----------------------------------------------------------

    def events_of(self, t: Term) -> frozenset:
        hit = self._events_cache.get(t)
        if hit is None:
            hit = self._live_events(t)
            if hit is None:
                hit = event_closure(t, self.spec) - {TAU}
            self._events_cache[t] = hit
        return hit

    def _live_events(self, t: Term) -> frozenset | None:
        """Events on some reachable step of t, or None when exploration is not possible.

        Dead code (blocked, renamed or unreachable events) does not count, so
        conflict elimination sees the same events a normal form would show.
        Guarded terms and nested requests fall back to the syntactic closure.
        """
        if t in self._events_busy or has_guards(t):
            return None
        self._events_busy.add(t)
        try:
            seen = {("p", t)}
            todo = [("p", t)]
            out = set()
            while todo:
                if len(seen) > self.limits.max_states:
                    return None
                kind, x = todo.pop()
                if kind == "p":
                    nxt = [("r", c) for c in self.candidates(x)]
                else:
                    nxt = []
                    for lab, res in self.steps(x):
                        out.update(lab)
                        if res is not None:
                            nxt.append(("p", res))
                for item in nxt:
                    if item not in seen:
                        seen.add(item)
                        todo.append(item)
            return frozenset(out) - {TAU}
        except UnguardedRecursion:
            return None
        finally:
            self._events_busy.discard(t)

    # ---- resolution -------------------------------------------------------

    def resolve(self, t: Term, s=None) -> list[tuple[Fraction, Term]]:
        """Support of the resolution distribution of t in data state s, weights merged."""
        return self._resolve(t, s, 0)

    def _resolve(self, t: Term, s, depth: int):
        key = (t, s)
        hit = self._resolve_cache.get(key)
        if hit is not None:
            return hit
        res = self._resolve_raw(t, s, depth)
        merged: dict = {}
        for w, r in res:
            if w:
                merged[r] = merged.get(r, 0) + w
        out = sorted(((Fraction(w), r) for r, w in merged.items()), key=lambda p: term_key(p[1]))
        self._resolve_cache[key] = out
        return out

    def _pairs(self, x, y, s, depth, build):
        out = []
        for (p, a), (q, b) in product(self._resolve(x, s, depth), self._resolve(y, s, depth)):
            out.append((p * q, build(a, b)))
        return out

    def _resolve_raw(self, t: Term, s, depth: int):
        R = self._resolve
        if isinstance(t, (Atom, Delta, Epsilon, Tau)):
            return [(Fraction(1), Breve(t))]
        if isinstance(t, Breve):
            return [(Fraction(1), t)]
        if isinstance(t, Resolved):
            return [(Fraction(1), t.arg)]
        if isinstance(t, GuardAtom):
            if self.env is None:
                raise MissingDataEnv()
            return [(Fraction(1), B_EPS if eval_guard(t.guard, s, self.env) else B_DELTA)]
        if isinstance(t, ProbAlt):
            out = [(t.prob * w, r) for w, r in R(t.left, s, depth)]
            out += [((1 - t.prob) * w, r) for w, r in R(t.right, s, depth)]
            return out
        if isinstance(t, Alt):
            out = [(Fraction(1), B_DELTA)]
            for part in summands(t):
                out = [(p * q, mk_alt((a, b))) for p, a in out for q, b in R(part, s, depth)]
            return out
        if isinstance(t, Seq):
            out = []
            for p, x1 in R(t.left, s, depth):
                if not self.term_flag(x1):
                    out.append((p, mk_seq(x1, t.right)))
                    continue
                live = bool(self.steps(x1))
                for q, z1 in R(t.right, s, depth):
                    out.append((p * q, mk_alt((mk_seq(x1, t.right), z1)) if live else z1))
            return out
        if isinstance(t, (Par, Whole, LeftMerge, Comm)):
            return self._pairs(t.left, t.right, s, depth, type(t))
        if isinstance(t, ConflictElim):
            inner = R(t.arg, s, depth)
            return [(w, self._theta_branch(r, [x for _, x in inner])) for w, r in inner]
        if isinstance(t, Encap):
            return [(w, Encap(t.events, r)) for w, r in R(t.arg, s, depth)]
        if isinstance(t, Hide):
            return [(w, Hide(t.events, r)) for w, r in R(t.arg, s, depth)]
        if isinstance(t, Project):
            if t.depth == 0:
                return [(Fraction(1), B_DELTA)]
            return [(w, Project(t.depth, r)) for w, r in R(t.arg, s, depth)]
        if isinstance(t, Unless):
            evs = self.events_of(t.right)
            return [(w, self.rename(r, evs)) for w, r in R(t.left, s, depth)]
        if isinstance(t, RecVar):
            if depth >= self.limits.unfold:
                raise UnguardedRecursion(t.name)
            return self._resolve_raw(self.spec.body(t.name), s, depth + 1)
        raise TypeError(f"cannot resolve {t!r}")

    def _theta_branch(self, r: Term, support) -> Term:
        # each probabilistic branch is renamed against the events of the others;
        # branches that differ only by trivial wrappers count as one
        mine = _tidy(r)
        others = frozenset().union(*(self.events_of(x) for x in support if _tidy(x) != mine))
        return self.rename(ConflictElim(r), others)

    # ---- static termination ---------------------------------------------

    def term_flag(self, r: Term) -> bool:
        hit = self._term_cache.get(r)
        if hit is None:
            hit = self._term_raw(r)
            self._term_cache[r] = hit
        return hit

    def _term_raw(self, r: Term) -> bool:
        if isinstance(r, Breve):
            return isinstance(r.arg, Epsilon)
        if isinstance(r, Alt):
            return any(self.term_flag(x) for x in summands(r))
        if isinstance(r, (Seq, Comm)):
            return False
        if isinstance(r, (Par, Whole, LeftMerge)):
            return self.term_flag(r.left) and self.term_flag(r.right)
        if isinstance(r, Project):
            return r.depth > 0 and self.term_flag(r.arg)
        if isinstance(r, Unless):
            return self.term_flag(r.left)
        if isinstance(r, (ConflictElim, Encap, Hide, Resolved)):
            return self.term_flag(r.arg)
        raise TypeError(f"not a resolved term: {r!r}")

    # ---- renaming by the unless operator ---------------------------------

    def rename(self, r: Term, events: frozenset) -> Term:
        events = frozenset(e for e in events if e != TAU)
        if not events:
            return r
        key = (r, events)
        hit = self._rename_cache.get(key)
        if hit is None:
            hit = self._rename_raw(r, events)
            self._rename_cache[key] = hit
        return hit

    def _rename_raw(self, r: Term, evs: frozenset) -> Term:
        if isinstance(r, Breve):
            if isinstance(r.arg, Atom) and self.alg.eliminated(r.arg.name, evs):
                return B_TAU
            return r
        if isinstance(r, Alt):
            return mk_alt(self.rename(x, evs) for x in summands(r))
        if isinstance(r, Seq):
            return mk_seq(self.rename(r.left, evs), unless(r.right, evs))
        if isinstance(r, LeftMerge) and self._step_chain(r):
            return LeftMerge(self.rename(r.left, evs), self.rename(r.right, evs))
        if isinstance(r, Resolved):
            return Resolved(self.rename(r.arg, evs))
        if isinstance(r, Unless):
            return Unless(r.left, atoms_sum(_atom_set(r.right) | evs))
        # like conflict elimination, renaming sees its operand one step expanded
        return self.rename(self.head_form(r), evs)

    # ---- conflict elimination --------------------------------------------

    def theta_head(self, r: Term) -> Term:
        hit = self._theta_cache.get(r)
        if hit is None:
            hit = self._theta_raw(r)
            self._theta_cache[r] = hit
        return hit

    def _theta_raw(self, r: Term) -> Term:
        # Conflict elimination distributes over sums, sequences and step chains.
        # Every other operator is first expanded one step deep, the way the
        # rewriter normalizes an operand before eliminating conflicts in it.
        if isinstance(r, Breve):
            return r
        if isinstance(r, Alt):
            return self._theta_sum(summands(r))
        if isinstance(r, Seq) and (isinstance(r.left, Breve) or self._step_chain(r.left)):
            return mk_seq(self.theta_head(r.left), ConflictElim(r.right))
        if isinstance(r, LeftMerge) and self._step_chain(r):
            x, y = r.left, r.right
            return mk_alt((
                LeftMerge(self.rename(self.theta_head(x), self.events_of(y)), y),
                LeftMerge(self.rename(self.theta_head(y), self.events_of(x)), x),
            ))
        if isinstance(r, Resolved):
            return self.theta_head(r.arg)
        return self.theta_head(self.head_form(r))

    def _theta_sum(self, parts: list) -> Term:
        evs = [self.events_of(p) for p in parts]
        out = []
        for i, p in enumerate(parts):
            others = frozenset().union(*(evs[j] for j in range(len(parts)) if j != i))
            out.append(self.rename(self.theta_head(p), others))
        return mk_alt(out)

    def _step_chain(self, r: Term) -> bool:
        """A left merge of event leaves that fires as one step."""
        if not _is_chain(r):
            return False
        evs = [x.arg.name for x in _chain_leaves(r) if isinstance(x.arg, Atom)]
        return all(self.alg.concurrent(a, b) for i, a in enumerate(evs) for b in evs[i + 1:])

    def head_form(self, r: Term) -> Term:
        """A structural resolved term with the same steps as r: a sum of step chains."""
        parts = [B_EPS] if self.term_flag(r) else []
        for lab, res in self.steps(r):
            chain = None
            for e in lab:
                leaf = B_TAU if e == TAU else Breve(Atom(e))
                chain = leaf if chain is None else LeftMerge(chain, leaf)
            parts.append(chain if res is None else Seq(chain, res))
        return mk_alt(parts) if parts else B_DELTA

    def _theta_sum(self, parts: list) -> Term:
        evs = [self.events_of(p) for p in parts]
        out = []
        for i, p in enumerate(parts):
            others = frozenset().union(*(evs[j] for j in range(len(parts)) if j != i))
            out.append(self.rename(self.theta_head(p), others))
        return mk_alt(out)

    # ---- action steps ----------------------------------------------------

    def steps(self, r: Term) -> list[tuple[Label, Term | None]]:
        hit = self._steps_cache.get(r)
        if hit is None:
            raw = self._steps_raw(r)
            seen = {}
            for lab, res in raw:
                res = None if res is None else canonicalize(res)
                seen[(lab, res)] = None
            hit = sorted(seen, key=lambda p: (p[0], (0,) if p[1] is None else (1, term_key(p[1]))))
            self._steps_cache[r] = hit
        return hit

    def compatible(self, l1: Label, l2: Label) -> bool:
        return all(self.alg.concurrent(a, b) for a in l1 for b in l2)

    def _sync(self, s1, s2):
        for (l1, r1), (l2, r2) in product(s1, s2):
            if len(l1) + len(l2) > self.limits.max_events:
                raise StepTooLarge(self.limits.max_events)
            if self.compatible(l1, l2):
                yield tuple(sorted(l1 + l2)), whole(r1, r2)

    def _steps_raw(self, r: Term):
        if isinstance(r, Breve):
            if isinstance(r.arg, Atom):
                return [((r.arg.name,), None)]
            if isinstance(r.arg, Tau):
                return [((TAU,), None)]
            return []
        if isinstance(r, Alt):
            return [st for x in summands(r) for st in self.steps(x)]
        if isinstance(r, Seq):
            z = r.right
            return [(lab, z if res is None else Seq(res, z)) for lab, res in self.steps(r.left)]
        if isinstance(r, Par):
            return self._par_steps(r.left, r.right)
        if isinstance(r, LeftMerge):
            x, y = r.left, r.right
            s1, s2 = self.steps(x), self.steps(y)
            out = list(self._sync(s1, s2))
            if self.term_flag(x):
                out += s2
            if self.term_flag(y):
                out += s1
            return out
        if isinstance(r, Comm):
            return self._comm_steps(self.steps(r.left), self.steps(r.right))
        if isinstance(r, Whole):
            return self._par_steps(r.left, r.right) + self._comm_steps(self.steps(r.left), self.steps(r.right))
        if isinstance(r, ConflictElim):
            return self.steps(self.theta_head(r.arg))
        if isinstance(r, Encap):
            return [(lab, None if res is None else Encap(r.events, res))
                    for lab, res in self.steps(r.arg) if not set(lab) & r.events]
        if isinstance(r, Hide):
            return [(tuple(sorted(TAU if e in r.events else e for e in lab)),
                     None if res is None else Hide(r.events, res)) for lab, res in self.steps(r.arg)]
        if isinstance(r, Project):
            return [(lab, None if res is None else Project(r.depth - 1, res)) for lab, res in self.steps(r.arg)]
        if isinstance(r, Unless):
            evs = _atom_set(r.right)
            return [(tuple(sorted(TAU if self.alg.eliminated(e, evs) else e for e in lab)), unless(res, evs))
                    for lab, res in self.steps(r.left)]
        if isinstance(r, Resolved):
            return self.steps(r.arg)
        raise TypeError(f"not a resolved term: {r!r}")

    def _par_steps(self, x: Term, y: Term):
        s1, s2 = self.steps(x), self.steps(y)
        out = list(self._sync(s1, s2))
        if self.term_flag(x):
            out += s2
        if self.term_flag(y):
            out += s1
        out += self._race(s1, s2, y, left=True)
        out += self._race(s2, s1, x, left=False)
        if not self.limits.interleave_on_race_only:
            if not s2 and not self.term_flag(y):
                out += [(lab, whole(res, Resolved(y))) for lab, res in s1]
            if not s1 and not self.term_flag(x):
                out += [(lab, whole(Resolved(x), res)) for lab, res in s2]
        return out

    def _race(self, mine, theirs, other: Term, left: bool):
        # A racing event moves alone whether or not its rival is enabled on the
        # other side: when the rival is absent the race is won by default, when
        # present this side wins it.
        if not self.alg.races:
            return []
        racers = {e for pair in self.alg.races for e in pair}
        out = []
        for lab, res in mine:
            if racers.intersection(lab):
                frozen = Resolved(other)
                out.append((lab, whole(res, frozen) if left else whole(frozen, res)))
        return out

    def _comm_steps(self, s1, s2):
        out = []
        for (l1, r1), (l2, r2) in product(s1, s2):
            for lab in self._matchings(l1, l2):
                out.append((lab, whole(r1, r2)))
        return out

    def _matchings(self, l1: Label, l2: Label):
        """Labels obtained by communicating a nonempty matching of events across l1 and l2."""
        results = set()

        def go(i, used, comm, rest1):
            if i == len(l1):
                if comm:
                    rest2 = [e for j, e in enumerate(l2) if j not in used]
                    lab = tuple(sorted(comm + rest1 + rest2))
                    if all(self.alg.concurrent(a, b) for k, a in enumerate(lab) for b in lab[k + 1:]):
                        results.add(lab)
                return
            e = l1[i]
            go(i + 1, used, comm, rest1 + [e])
            if e == TAU:
                return
            for j, f in enumerate(l2):
                if j in used or f == TAU:
                    continue
                c = self.alg.gamma(e, f)
                if c is not None and c != "delta":
                    go(i + 1, used | {j}, comm + [c], rest1)

        go(0, frozenset(), [], [])
        return sorted(results)

    # ---- transition systems ----------------------------------------------

    def build(self, root: Term, data=None) -> Plts:
        """Explore the reachable alternating system from root in BFS order."""
        cap = self.limits.max_states
        if data is None and self.env is not None:
            data = self.env.initial
        index: dict = {}
        states: list = []
        prob_edges: dict = {}
        act_edges: dict = {}
        queue = deque()

        def intern(kind, term, d, flag=False):
            key = (kind, term, d)
            i = index.get(key)
            if i is None:
                if len(states) >= cap:
                    raise StateCapExceeded(cap)
                i = len(states)
                index[key] = i
                states.append(PState(kind, term, d, flag))
                queue.append(i)
            return i

        intern("prob", canonicalize(root), data)
        while queue:
            i = queue.popleft()
            st = states[i]
            if st.kind == "prob":
                edges = []
                for w, r in self.resolve(st.term, st.data):
                    flag = self.term_flag(r)
                    kind = "terminated" if flag and not self.steps(r) else "resolved"
                    edges.append((w, intern(kind, r, st.data, flag)))
                prob_edges[i] = edges
            elif st.kind == "resolved":
                edges = {}
                for lab, res in self.steps(st.term):
                    nxt = EPS if res is None else res
                    if self.env is None or st.data is None:
                        targets = [None]
                    else:
                        targets = sorted(self.env.step_effect(lab, st.data), key=str)
                    for d in targets:
                        edges[(lab, intern("prob", nxt, d))] = None
                act_edges[i] = list(edges)
        return Plts(states, prob_edges, act_edges, 0, self.alg)

    # ---- probability distribution function ------------------------------

    def candidates(self, t: Term, s=None, depth: int = 0) -> frozenset:
        """All resolved terms t can reach by some choice of its probabilistic operands (no weights)."""
        C = lambda u: self.candidates(u, s, depth)
        if isinstance(t, (Atom, Delta, Epsilon, Tau)):
            return frozenset((Breve(t),))
        if isinstance(t, Breve):
            return frozenset((t,))
        if isinstance(t, Resolved):
            return frozenset((t.arg,))
        if isinstance(t, GuardAtom):
            return frozenset((B_EPS, B_DELTA))
        if isinstance(t, ProbAlt):
            return C(t.left) | C(t.right)
        if isinstance(t, Alt):
            return frozenset(mk_alt((a, b)) for a in C(t.left) for b in C(t.right))
        if isinstance(t, Seq):
            out = set()
            for x1 in C(t.left):
                if not self.term_flag(x1):
                    out.add(mk_seq(x1, t.right))
                elif self.steps(x1):
                    out |= {mk_alt((mk_seq(x1, t.right), z1)) for z1 in C(t.right)}
                else:
                    out |= C(t.right)
            return frozenset(out)
        if isinstance(t, (Par, Whole, LeftMerge, Comm)):
            return frozenset(type(t)(a, b) for a in C(t.left) for b in C(t.right))
        if isinstance(t, ConflictElim):
            support = self._support(t.arg, s, depth)
            return frozenset(self._theta_branch(a, support) for a in support)
        if isinstance(t, Encap):
            return frozenset(Encap(t.events, a) for a in C(t.arg))
        if isinstance(t, Hide):
            return frozenset(Hide(t.events, a) for a in C(t.arg))
        if isinstance(t, Project):
            if t.depth == 0:
                return frozenset((B_DELTA,))
            return frozenset(Project(t.depth, a) for a in C(t.arg))
        if isinstance(t, Unless):
            evs = self.events_of(t.right)
            return frozenset(self.rename(a, evs) for a in C(t.left))
        if isinstance(t, RecVar):
            if depth >= self.limits.unfold:
                raise UnguardedRecursion(t.name)
            return self.candidates(self.spec.body(t.name), s, depth + 1)
        raise TypeError(f"cannot resolve {t!r}")

    def _support(self, t: Term, s, depth: int) -> list:
        return sorted((c for c in self.candidates(t, s, depth) if self.mu(t, c, s, depth) > 0), key=term_key)

    def mu(self, t: Term, r: Term, s=None, depth: int = 0) -> Fraction:
        """Probability that t resolves to r, computed clause by clause over the operator of t."""
        M = lambda u, v: self.mu(u, v, s, depth)
        C = lambda u: self.candidates(u, s, depth)
        one, zero = Fraction(1), Fraction(0)
        if isinstance(t, (Atom, Delta, Epsilon, Tau)):
            return one if r == Breve(t) else zero
        if isinstance(t, Breve):
            return one if r == t else zero
        if isinstance(t, Resolved):
            return one if r == t.arg else zero
        if isinstance(t, GuardAtom):
            if self.env is None:
                raise MissingDataEnv()
            return one if r == (B_EPS if eval_guard(t.guard, s, self.env) else B_DELTA) else zero
        if isinstance(t, ProbAlt):
            return t.prob * M(t.left, r) + (1 - t.prob) * M(t.right, r)
        if isinstance(t, Alt):
            return sum((M(t.left, a) * M(t.right, b)
                        for a in C(t.left) for b in C(t.right) if mk_alt((a, b)) == r), zero)
        if isinstance(t, Seq):
            total = zero
            for x1 in C(t.left):
                if not self.term_flag(x1):
                    if mk_seq(x1, t.right) == r:
                        total += M(t.left, x1)
                    continue
                live = bool(self.steps(x1))
                for z1 in C(t.right):
                    built = mk_alt((mk_seq(x1, t.right), z1)) if live else z1
                    if built == r:
                        total += M(t.left, x1) * M(t.right, z1)
            return total
        if isinstance(t, (Par, Whole, LeftMerge, Comm)):
            if type(r) is not type(t):
                return zero
            return M(t.left, r.left) * M(t.right, r.right)
        if isinstance(t, ConflictElim):
            support = self._support(t.arg, s, depth)
            return sum((M(t.arg, a) for a in support if self._theta_branch(a, support) == r), zero)
        if isinstance(t, (Encap, Hide)):
            if type(r) is not type(t) or r.events != t.events:
                return zero
            return M(t.arg, r.arg)
        if isinstance(t, Project):
            if t.depth == 0:
                return one if r == B_DELTA else zero
            if not isinstance(r, Project) or r.depth != t.depth:
                return zero
            return M(t.arg, r.arg)
        if isinstance(t, Unless):
            evs = self.events_of(t.right)
            return sum((M(t.left, a) for a in C(t.left) if self.rename(a, evs) == r), zero)
        if isinstance(t, RecVar):
            if depth >= self.limits.unfold:
                raise UnguardedRecursion(t.name)
            return self.mu(self.spec.body(t.name), r, s, depth + 1)
        raise TypeError(f"cannot resolve {t!r}")


def build_plts(root: Term, algebra: AlgebraDecl = EMPTY_ALGEBRA, spec: RecSpec = EMPTY_SPEC,
               env: DataEnv | None = None, limits: Limits = DEFAULT_LIMITS, data=None) -> Plts:
    return Semantics(algebra, spec, env, limits).build(root, data)


def resolve(t: Term, algebra: AlgebraDecl = EMPTY_ALGEBRA, spec: RecSpec = EMPTY_SPEC,
            env: DataEnv | None = None, s=None, limits: Limits = DEFAULT_LIMITS):
    return Semantics(algebra, spec, env, limits).resolve(t, s)


def mu(t: Term, r: Term, algebra: AlgebraDecl = EMPTY_ALGEBRA, spec: RecSpec = EMPTY_SPEC,
       env: DataEnv | None = None, s=None, limits: Limits = DEFAULT_LIMITS) -> Fraction:
    return Semantics(algebra, spec, env, limits).mu(t, r, s)


def action_steps(r: Term, algebra: AlgebraDecl = EMPTY_ALGEBRA, spec: RecSpec = EMPTY_SPEC,
                 env: DataEnv | None = None, s=None, limits: Limits = DEFAULT_LIMITS):
    """Transitions of a resolved term as (label, residual, successor data state) triples."""
    sem = Semantics(algebra, spec, env, limits)
    out = []
    for lab, res in sem.steps(r):
        targets = [s] if env is None or s is None else sorted(env.step_effect(lab, s), key=str)
        for d in targets:
            out.append((lab, res, d))
    return out
