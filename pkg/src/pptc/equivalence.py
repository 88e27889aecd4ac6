"""Equivalence checking on alternating probabilistic transition systems.

All checkers work on the disjoint union of the two systems.  Strong
relations use partition refinement with exact class-weight vectors for
probabilistic states; the branching relation uses signature refinement over
inert (class-preserving) silent and probabilistic moves.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .terms import TAU, TermError

PSTEP, PPOMSET, PHP, PHHP, PRBSTEP, PBSTEP = "pstep", "ppomset", "php", "phhp", "prbstep", "pbstep"
RELATIONS = (PSTEP, PPOMSET, PHP, PHHP, PRBSTEP, PBSTEP)


class Unsupported(TermError):
    pass


@dataclass
class EquivVerdict:
    relation: str
    equivalent: bool
    witness: frozenset | None = None       # related cross pairs (i in left, j in right)
    observation: str | None = None          # why the roots differ
    classes: int = 0
    sizes: tuple = (0, 0)
    extra: dict = field(default_factory=dict)

    def __bool__(self):
        return self.equivalent

    def report(self) -> str:
        lines = [f"verdict: {'equivalent' if self.equivalent else 'not equivalent'} ({self.relation})",
                 f"states: {self.sizes[0]} + {self.sizes[1]}, classes: {self.classes}"]
        if self.witness is not None:
            lines.append(f"relation size: {len(self.witness)}")
        if self.observation:
            lines.append(f"distinguishing observation: {self.observation}")
        for k, v in self.extra.items():
            lines.append(f"{k}: {v}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({
            "relation": self.relation,
            "equivalent": self.equivalent,
            "relation_size": None if self.witness is None else len(self.witness),
            "witness": None if self.witness is None else sorted(map(list, self.witness)),
            "observation": self.observation,
            "classes": self.classes,
            "states": list(self.sizes),
            **{k: v if isinstance(v, (int, float, str, bool, type(None), list)) else str(v)
               for k, v in self.extra.items()},
        }, sort_keys=True)


# ---------------------------------------------------------------------------
# disjoint union view

class Union:
    """Two systems side by side; right-hand states are shifted by len(p.states)."""

    def __init__(self, p, q):
        self.p, self.q = p, q
        self.off = off = p.n_states
        self.n = off + q.n_states
        self.kind, self.data, self.flag = [], [], []
        self.prob = [[] for _ in range(self.n)]
        self.act = [[] for _ in range(self.n)]
        for base, sys_ in ((0, p), (off, q)):
            for i, st in enumerate(sys_.states):
                self.kind.append(st.kind)
                self.data.append(st.data)
                self.flag.append(st.can_terminate or st.kind == "terminated")
                self.prob[base + i] = [(w, base + j) for w, j in sys_.prob_edges.get(i, ())]
                self.act[base + i] = [(lab, base + j) for lab, j in sys_.act_edges.get(i, ())]
        self.roots = (p.root, off + q.root)

    def cross_pairs(self, cls):
        return frozenset((i, j - self.off) for i in range(self.off) for j in range(self.off, self.n)
                         if cls[i] == cls[j])


def _renumber(keys):
    table = {}
    return [table.setdefault(k, len(table)) for k in keys]


def _weights(edges, cls):
    acc = defaultdict(Fraction)
    for w, j in edges:
        acc[cls[j]] += w
    return tuple(sorted(acc.items()))


def _refine(u: Union, init, signature):
    cls = _renumber(init)
    history = [cls]
    while True:
        sigs = [(cls[i], signature(i, cls)) for i in range(u.n)]
        new = _renumber(sigs)
        history.append(new)
        if len(set(new)) == len(set(cls)):
            return new, history
        cls = new


def _explain(u: Union, history, a: int, b: int, signature) -> str:
    """Describe the first refinement round that separates a and b."""
    for k in range(1, len(history)):
        if history[k][a] != history[k][b]:
            prev = history[k - 1]
            if prev[a] != prev[b]:
                return (f"states {a} and {b} differ in kind, data or termination "
                        f"({u.kind[a]}/{u.data[a]} vs {u.kind[b]}/{u.data[b]})")
            sa, sb = signature(a, prev), signature(b, prev)
            return f"state {a} offers {_show_sig(sa, sb)}; state {b} offers {_show_sig(sb, sa)}"
    return "roots differ"


def _show_sig(mine, theirs):
    if isinstance(mine, frozenset) and isinstance(theirs, frozenset):
        only = sorted(mine - theirs, key=repr)
        return "{" + ", ".join(_fmt_item(x) for x in only[:4]) + "}" if only else "nothing extra"
    if isinstance(mine, tuple) and isinstance(theirs, tuple) and len(mine) == len(theirs) \
            and any(isinstance(x, frozenset) for x in mine):
        # composite signature: show only the differing components
        parts = [_show_sig(x, y) for x, y in zip(mine, theirs) if x != y]
        return "; ".join(parts) if parts else "nothing extra"
    if isinstance(mine, tuple) and all(isinstance(x, tuple) and len(x) == 2 for x in mine):
        return "{" + ", ".join(f"class {c}: {w}" for c, w in mine) + "}"
    return str(mine)


def _fmt_item(x):
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], tuple):
        lab, c = x
        if lab and isinstance(lab[0], tuple):
            lab = ";".join("{" + ",".join(l) + "}" for l in lab)
        else:
            lab = "{" + ",".join(lab) + "}"
        return f"{lab} into class {c}"
    return repr(x)


def _verdict(u, relation, cls, history, signature, extra=None):
    a, b = u.roots
    eq = cls[a] == cls[b]
    obs = None if eq else _explain(u, history, a, b, signature)
    return EquivVerdict(relation, eq, u.cross_pairs(cls) if eq else None, obs,
                        len(set(cls)), (u.p.n_states, u.q.n_states), extra or {})


# ---------------------------------------------------------------------------
# strong step and pomset bisimulation

def step_partition(u: Union):
    def sig(i, cls):
        if u.kind[i] == "prob":
            return _weights(u.prob[i], cls)
        return frozenset((lab, cls[j]) for lab, j in u.act[i])
    init = [(u.kind[i], u.data[i], u.flag[i]) for i in range(u.n)]
    cls, hist = _refine(u, init, sig)
    return cls, hist, sig


def prob_step_bisim(p, q) -> EquivVerdict:
    u = Union(p, q)
    cls, hist, sig = step_partition(u)
    return _verdict(u, PSTEP, cls, hist, sig)


def pomset_moves(u: Union, i: int, max_events: int):
    """Layered pomsets of at most max_events events from resolved state i, with target states."""
    out = set()

    def go(state, layers, size):
        for lab, j in u.act[state]:
            if size + len(lab) > max_events:
                continue
            lay = layers + (lab,)
            out.add((lay, j))
            for _, r in u.prob[j]:
                go(r, lay, size + len(lab))

    go(i, (), 0)
    return out


def prob_pomset_bisim(p, q, max_pomset: int = 6) -> EquivVerdict:
    if max_pomset < 1:
        raise ValueError("max_pomset must be at least 1")
    u = Union(p, q)
    moves = [pomset_moves(u, i, max_pomset) if u.kind[i] == "resolved" else () for i in range(u.n)]

    def sig(i, cls):
        if u.kind[i] == "prob":
            return _weights(u.prob[i], cls)
        return frozenset((lay, cls[j]) for lay, j in moves[i])

    init = [(u.kind[i], u.data[i], u.flag[i]) for i in range(u.n)]
    cls, hist = _refine(u, init, sig)
    return _verdict(u, PPOMSET, cls, hist, sig, {"max_pomset": max_pomset})


# ---------------------------------------------------------------------------
# history-preserving bisimulation on acyclic systems

def _layer_isos(l1: tuple, l2: tuple):
    """Label-preserving bijections between two steps, as index tuples."""
    if sorted(l1) != sorted(l2):
        return
    n = len(l1)

    def go(k, used, acc):
        if k == n:
            yield tuple(acc)
            return
        for j in range(n):
            if j not in used and l2[j] == l1[k]:
                yield from go(k + 1, used | {j}, acc + [j])

    yield from go(0, frozenset(), [])


def _hp_search(p, q, max_events: int):
    """Posetal relation between runs of two acyclic systems.

    Runs are sequences of steps; the causal order of a run places every event
    of a step after all events of earlier steps.  A triple relates two runs
    ending in states s and t together with an order isomorphism f between
    their events.  Returns (related, triples, cls) where related says whether
    the root triple survives the greatest fixpoint.
    """
    u = Union(p, q)
    cls, _, _ = step_partition(u)
    for sys_ in (p, q):
        if not sys_.is_acyclic():
            raise Unsupported("history-preserving bisimulation needs an acyclic system")
    total = sum(len(lab) for edges in u.act for lab, _ in edges)
    if total > max_events * 8:
        raise Unsupported(f"system too large for history-preserving search ({total} event occurrences)")

    # triple = (s, t, f) with f a tuple of (event index in s-run, event index in t-run)
    root = (u.roots[0], u.roots[1], ())
    triples = {}
    stack = [root]
    while stack:
        tr = stack.pop()
        if tr in triples:
            continue
        s, t, f = tr
        children = []
        if u.kind[s] == "prob" and u.kind[t] == "prob":
            for (_, s2), (_, t2) in product(u.prob[s], u.prob[t]):
                if cls[s2] == cls[t2]:
                    children.append(("p", s2, t2, f))
        elif u.kind[s] == u.kind[t] == "resolved":
            n = len(f)
            for (l1, s2), (l2, t2) in product(u.act[s], u.act[t]):
                if cls[s2] != cls[t2]:
                    continue
                for iso in _layer_isos(l1, l2):
                    f2 = f + tuple((n + k, n + j) for k, j in enumerate(iso))
                    children.append((l1, s2, t2, f2))
        triples[tr] = children
        stack.extend((c[1], c[2], c[3]) for c in children)

    alive = set(triples)
    changed = True
    while changed:
        changed = False
        for tr in list(alive):
            if not _hp_transfer(u, cls, tr, triples[tr], alive):
                alive.discard(tr)
                changed = True
    return root in alive, alive, cls, u


def _hp_transfer(u, cls, tr, children, alive) -> bool:
    s, t, f = tr
    if u.kind[s] != u.kind[t] or u.data[s] != u.data[t] or u.flag[s] != u.flag[t]:
        return False
    live = [c for c in children if (c[1], c[2], c[3]) in alive]
    if u.kind[s] == "prob":
        # every resolution of either side must land in a class reachable through live triples
        ok_s = {c[1] for c in live}
        ok_t = {c[2] for c in live}
        if any(j not in ok_s for _, j in u.prob[s]) or any(j not in ok_t for _, j in u.prob[t]):
            return False
        return _weights(u.prob[s], cls) == _weights(u.prob[t], cls)
    if u.kind[s] == "resolved":
        for lab, s2 in u.act[s]:
            if not any(c[0] == lab and c[1] == s2 for c in live):
                return False
        for lab, t2 in u.act[t]:
            if not any(sorted(c[0]) == sorted(lab) and c[2] == t2 for c in live):
                return False
    return True


def prob_hp_bisim(p, q, max_events: int = 64) -> EquivVerdict:
    ok, alive, cls, u = _hp_search(p, q, max_events)
    return EquivVerdict(PHP, ok, frozenset((s, t - u.off) for s, t, _ in alive) if ok else None,
                        None if ok else "no posetal relation relates the initial runs",
                        len(set(cls)), (p.n_states, q.n_states), {"triples": len(alive)})


def prob_hhp_bisim(p, q, max_events: int = 64) -> EquivVerdict:
    ok, alive, cls, u = _hp_search(p, q, max_events)
    closed = True
    if ok:
        # downward closure: removing the last step of both runs must give a related triple
        parents = {}
        stack = [(u.roots[0], u.roots[1], ())]
        seen = set()
        while stack:
            tr = stack.pop()
            if tr in seen or tr not in alive:
                continue
            seen.add(tr)
            for nxt in _children_in(u, cls, tr, alive):
                parents.setdefault(nxt, set()).add(tr)
                stack.append(nxt)
        for tr, ps in parents.items():
            if not ps <= alive:
                closed = False
    eq = ok and closed
    return EquivVerdict(PHHP, eq, frozenset((s, t - u.off) for s, t, _ in alive) if eq else None,
                        None if eq else "posetal relation is not downward closed" if ok
                        else "no posetal relation relates the initial runs",
                        len(set(cls)), (p.n_states, q.n_states), {"triples": len(alive)})


def _children_in(u, cls, tr, alive):
    s, t, f = tr
    out = []
    if u.kind[s] == "prob" and u.kind[t] == "prob":
        for (_, s2), (_, t2) in product(u.prob[s], u.prob[t]):
            if (s2, t2, f) in alive:
                out.append((s2, t2, f))
    elif u.kind[s] == "resolved":
        n = len(f)
        for (l1, s2), (l2, t2) in product(u.act[s], u.act[t]):
            for iso in _layer_isos(l1, l2):
                f2 = f + tuple((n + k, n + j) for k, j in enumerate(iso))
                if (s2, t2, f2) in alive:
                    out.append((s2, t2, f2))
    return out


# ---------------------------------------------------------------------------
# branching bisimulation

def _is_tau(lab) -> bool:
    return all(e == TAU for e in lab)


def _visible(lab):
    return tuple(e for e in lab if e != TAU) or (TAU,)


def branching_signature(u: Union, i: int, cls):
    """(distribution, weak moves, weak termination) of state i under partition cls."""
    c = cls[i]
    if u.kind[i] == "prob":
        dist = _weights(u.prob[i], cls)
    else:
        dist = ((c, Fraction(1)),)
    moves = set()
    term = False
    seen = {i}
    stack = [i]
    while stack:
        x = stack.pop()
        if u.flag[x]:
            term = True
        if u.kind[x] == "prob":
            for _, y in u.prob[x]:
                if cls[y] == c and y not in seen:
                    seen.add(y)
                    stack.append(y)
            continue
        for lab, y in u.act[x]:
            if _is_tau(lab) and cls[y] == c:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
            else:
                moves.add((_visible(lab), cls[y]))
    return dist, frozenset(moves), term


def branching_partition(u: Union):
    # kinds are not separated: a silent step always enters a prob state, and
    # termination is already part of the signature
    init = [u.data[i] for i in range(u.n)]
    sig = lambda i, cls: branching_signature(u, i, cls)
    cls, hist = _refine(u, init, sig)
    return cls, hist, sig


def root_profile(u: Union, root: int, cls):
    """Weights of the root's resolutions grouped by class and first moves.

    A first move is never inert here, even when it stays in the class; only
    its visible part is compared, as in the branching signature.
    """
    if u.kind[root] != "prob":
        edges = [(Fraction(1), root)]
    else:
        edges = u.prob[root]
    acc = defaultdict(Fraction)
    for w, r in edges:
        key = (cls[r], u.flag[r], frozenset((_visible(lab), cls[j]) for lab, j in u.act[r]))
        acc[key] += w
    return acc


def prob_branching_step_bisim(p, q) -> EquivVerdict:
    u = Union(p, q)
    cls, hist, sig = branching_partition(u)
    return _verdict(u, PBSTEP, cls, hist, sig)


def prob_rooted_branching_step_bisim(p, q) -> EquivVerdict:
    u = Union(p, q)
    cls, hist, sig = branching_partition(u)
    a, b = u.roots
    if cls[a] != cls[b]:
        return _verdict(u, PRBSTEP, cls, hist, sig)
    pa, pb = root_profile(u, a, cls), root_profile(u, b, cls)
    if pa != pb:
        return EquivVerdict(PRBSTEP, False, None,
                            "initial moves differ (root condition): a silent first step is not matched",
                            len(set(cls)), (p.n_states, q.n_states), {"branching_equivalent": True})
    return EquivVerdict(PRBSTEP, True, u.cross_pairs(cls), None, len(set(cls)), (p.n_states, q.n_states))


# ---------------------------------------------------------------------------
# independent validators for witness relations

def _closure_classes(u: Union, pairs):
    parent = list(range(u.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    for a, b in pairs:
        parent[find(a)] = find(b)
    return [find(x) for x in range(u.n)]


def is_step_bisimulation(u: Union, cls) -> bool:
    """Literal transfer check of a candidate partition (class ids per state of the union)."""
    blocks = defaultdict(list)
    for i, c in enumerate(cls):
        blocks[c].append(i)
    for members in blocks.values():
        x = members[0]
        for y in members[1:]:
            if (u.kind[x], u.data[x], u.flag[x]) != (u.kind[y], u.data[y], u.flag[y]):
                return False
            if u.kind[x] == "prob":
                if _weights(u.prob[x], cls) != _weights(u.prob[y], cls):
                    return False
            else:
                mx = {(lab, cls[j]) for lab, j in u.act[x]}
                my = {(lab, cls[j]) for lab, j in u.act[y]}
                if mx != my:
                    return False
    return True


def validate_step_witness(p, q, witness) -> bool:
    u = Union(p, q)
    cls = _closure_classes(u, [(i, j + u.off) for i, j in witness])
    return cls[u.roots[0]] == cls[u.roots[1]] and is_step_bisimulation(u, cls)


def _inert_reach(u: Union, i: int, cls):
    seen = {i}
    stack = [i]
    while stack:
        x = stack.pop()
        succ = [y for _, y in u.prob[x]] if u.kind[x] == "prob" else \
            [y for lab, y in u.act[x] if _is_tau(lab)]
        for y in succ:
            if cls[y] == cls[i] and y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def is_branching_bisimulation(u: Union, cls) -> bool:
    """Literal transfer check of the branching conditions for a candidate partition."""
    for x in range(u.n):
        for y in range(u.n):
            if x >= y or cls[x] != cls[y]:
                continue
            if u.data[x] != u.data[y]:
                return False
            for a, b in ((x, y), (y, x)):
                da = _weights(u.prob[a], cls) if u.kind[a] == "prob" else ((cls[a], Fraction(1)),)
                db = _weights(u.prob[b], cls) if u.kind[b] == "prob" else ((cls[b], Fraction(1)),)
                if da != db:
                    return False
                reach_b = _inert_reach(u, b, cls)
                if any(u.flag[z] for z in _inert_reach(u, a, cls)) and not any(u.flag[z] for z in reach_b):
                    return False
                if u.kind[a] != "resolved":
                    continue
                for lab, a2 in u.act[a]:
                    if _is_tau(lab) and cls[a2] == cls[a]:
                        continue
                    ok = any(_visible(l2) == _visible(lab) and cls[b2] == cls[a2]
                             for z in reach_b if u.kind[z] == "resolved" for l2, b2 in u.act[z]
                             if not (_is_tau(l2) and cls[b2] == cls[z]))
                    if not ok:
                        return False
    # moves of inert-reachable prob states are covered by their own block membership
    return True


def validate_branching_witness(p, q, witness, rooted=True) -> bool:
    u = Union(p, q)
    cls = _closure_classes(u, [(i, j + u.off) for i, j in witness])
    if cls[u.roots[0]] != cls[u.roots[1]] or not is_branching_bisimulation(u, cls):
        return False
    if rooted:
        return root_profile(u, u.roots[0], cls) == root_profile(u, u.roots[1], cls)
    return True


# ---------------------------------------------------------------------------
# dispatch

def check(p, q, relation: str = PSTEP, max_pomset: int = 6, max_events: int = 64) -> EquivVerdict:
    if relation == PSTEP:
        return prob_step_bisim(p, q)
    if relation == PPOMSET:
        return prob_pomset_bisim(p, q, max_pomset)
    if relation == PHP:
        return prob_hp_bisim(p, q, max_events)
    if relation == PHHP:
        return prob_hhp_bisim(p, q, max_events)
    if relation == PRBSTEP:
        return prob_rooted_branching_step_bisim(p, q)
    if relation == PBSTEP:
        return prob_branching_step_bisim(p, q)
    raise ValueError(f"unknown relation {relation!r}; choose from {', '.join(RELATIONS)}")
