"""Alternating-bit protocol case study.

The protocol ships as spec-file templates (``specs/abp_cap1.pptc`` and
``specs/abp_cap2.pptc``).  A round has two alternating-bit exchanges so that
both sides learn that the other has accepted before delivering, and that the
other has delivered before accepting again; that is the synchronisation the
reference buffer demands.  Channels are FIFO with bounded capacity, lose an
entering frame with probability ``loss`` and, after emitting a frame, emit it
again with probability ``dup``.  Every component event is declared in a
race so that components can move independently; without races parallel
composition only offers joint steps.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from string import Template

from .config import DEFAULT_LIMITS, Limits
from .equivalence import prob_rooted_branching_step_bisim
from .parser import SpecFile, format_prob, parse_spec_file
from .semantics import Plts, build_plts
from .terms import TAU, Hide, RecVar, TermError

OBSERVABLE = ("acceptR", "acceptS", "deliverR", "deliverS")

_NEXT = {
    1: {"D0": "CD", "D1": "CD", "A0": "CA", "A1": "CA"},
    2: {"D0": "CD", "D1": "CD", "D00": "D0", "D01": "D1", "D10": "D0", "D11": "D1",
        "A0": "CA", "A1": "CA", "A00": "A0", "A01": "A1", "A10": "A0", "A11": "A1"},
}


def template_text(capacity: int) -> str:
    if capacity not in _NEXT:
        raise TermError(f"capacity must be 1 or 2, got {capacity}")
    return resources.files("pptc").joinpath("specs", f"abp_cap{capacity}.pptc").read_text(encoding="utf-8")


def instantiate(loss, dup=0, capacity: int = 1) -> str:
    """The spec-file text for the given loss and duplication probabilities."""
    loss, dup = Fraction(loss), Fraction(dup)
    if not 0 < loss < 1:
        raise TermError(f"loss probability must lie strictly between 0 and 1, got {loss}")
    if not 0 <= dup < 1:
        raise TermError(f"duplication probability must lie in [0, 1), got {dup}")
    subst = {"loss": format_prob(loss)}
    for state, nxt in _NEXT[capacity].items():
        if dup == 0:
            subst[f"after_{state}"] = nxt
        else:
            subst[f"after_{state}"] = f"({nxt} +[{format_prob(1 - dup)}] {state})"
    return Template(template_text(capacity)).substitute(subst)


def load(loss, dup=0, capacity: int = 1) -> SpecFile:
    return parse_spec_file(instantiate(loss, dup, capacity))


# ---------------------------------------------------------------------------
# weak step traces

def _visible(label) -> tuple:
    return tuple(e for e in label if e != TAU)


def _closure(lts: Plts, states) -> frozenset:
    seen = set(states)
    stack = list(states)
    while stack:
        i = stack.pop()
        succ = [j for _, j in lts.prob_edges.get(i, [])]
        succ += [j for lab, j in lts.act_edges.get(i, []) if not _visible(lab)]
        for j in succ:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return frozenset(seen)


def weak_step_traces(lts: Plts, depth: int) -> frozenset:
    """All sequences of visible steps of length <= depth, silent moves skipped.

    A step mixing silent and visible events counts as its visible part.
    Probabilistic branches of positive weight are all followed.
    """
    out = {()}
    layer = {(): _closure(lts, [lts.root])}
    for _ in range(depth):
        nxt: dict = {}
        for trace, states in layer.items():
            moves: dict = {}
            for i in states:
                for lab, j in lts.act_edges.get(i, []):
                    vis = _visible(lab)
                    if vis:
                        moves.setdefault(vis, set()).add(j)
            for vis, targets in moves.items():
                t2 = trace + (vis,)
                nxt[t2] = nxt.get(t2, frozenset()) | _closure(lts, targets)
        out |= set(nxt)
        layer = nxt
    return frozenset(out)


def buffer_traces(depth: int) -> frozenset:
    """Step traces of the two-place synchronising buffer, enumerated directly.

    Phases alternate between the accept pair and the deliver pair; a phase is
    either one joint step or its two events one at a time in either order.
    """
    phases = [("acceptR", "acceptS"), ("deliverR", "deliverS")]
    out = set()

    def go(trace, phase, pending):
        out.add(trace)
        if len(trace) == depth:
            return
        if not pending:
            phase = 1 - phase
            pending = phases[phase]
        go(trace + (tuple(pending),), phase, ())
        if len(pending) == 2:
            for e in pending:
                go(trace + ((e,),), phase, tuple(x for x in pending if x != e))

    go((), 0, phases[0])
    return frozenset(out)


# ---------------------------------------------------------------------------
# the case study

@dataclass
class AbpReport:
    loss: str
    dup: str
    capacity: int
    hidden: bool
    depth: int
    states_ab: int = 0
    states_buff: int = 0
    traces_ab: int = 0
    traces_buff: int = 0
    traces_equal: bool = False
    buff_matches_oracle: bool = False
    observable_alphabet: list = field(default_factory=list)
    only_in_ab: list = field(default_factory=list)
    only_in_buff: list = field(default_factory=list)
    prbs_equivalent: bool | None = None
    prbs_note: str = ""
    seconds: float = 0.0

    def text(self) -> str:
        lines = [
            f"alternating-bit protocol: loss {self.loss}, dup {self.dup}, capacity {self.capacity}"
            + ("" if self.hidden else ", internal actions visible"),
            f"  states: AB {self.states_ab}, Buff {self.states_buff}",
            f"  weak step traces up to depth {self.depth}: AB {self.traces_ab}, Buff {self.traces_buff}"
            f" -> {'equal' if self.traces_equal else 'DIFFERENT'}",
            f"  Buff traces agree with direct enumeration: {self.buff_matches_oracle}",
            f"  observable events of AB: {', '.join(self.observable_alphabet)}",
        ]
        for name, diff in (("only AB", self.only_in_ab), ("only Buff", self.only_in_buff)):
            for tr in diff[:3]:
                lines.append(f"  {name}: " + " ; ".join("{" + ",".join(s) + "}" for s in tr))
        if self.prbs_equivalent is not None:
            lines.append(f"  rooted branching step bisimilar (reported, not a gate): {self.prbs_equivalent}"
                         + (f" ({self.prbs_note})" if self.prbs_note else ""))
        lines.append(f"  time: {self.seconds:.2f}s")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["only_in_ab"] = [[list(s) for s in tr] for tr in self.only_in_ab]
        d["only_in_buff"] = [[list(s) for s in tr] for tr in self.only_in_buff]
        return d


def _by_length(traces):
    return sorted(traces, key=lambda t: (len(t), t))


def run_abp(loss=Fraction(1, 2), dup=0, capacity: int = 1, hide: bool = True, depth: int = 6,
            branching: bool = True, limits: Limits = DEFAULT_LIMITS) -> AbpReport:
    t0 = time.perf_counter()
    spec = load(loss, dup, capacity)
    root = spec.root
    if not hide and isinstance(root, Hide):
        root = root.arg
    ab = build_plts(root, spec.algebra, spec.recspec, limits=limits)
    buff = build_plts(RecVar("Buff"), spec.algebra, spec.recspec, limits=limits)
    tr_ab, tr_buff = weak_step_traces(ab, depth), weak_step_traces(buff, depth)
    rep = AbpReport(format_prob(Fraction(loss)), str(Fraction(dup)), capacity, hide, depth,
                    len(ab.states), len(buff.states), len(tr_ab), len(tr_buff), tr_ab == tr_buff,
                    tr_buff == buffer_traces(depth))
    rep.observable_alphabet = sorted({e for tr in tr_ab for step in tr for e in step})
    rep.only_in_ab = _by_length(tr_ab - tr_buff)
    rep.only_in_buff = _by_length(tr_buff - tr_ab)
    if branching:
        v = prob_rooted_branching_step_bisim(ab, buff)
        rep.prbs_equivalent = v.equivalent
        rep.prbs_note = v.observation or ""
    rep.seconds = time.perf_counter() - t0
    return rep
