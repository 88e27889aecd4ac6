"""Partial-correctness triples over guarded terms.

Three layers:

* ``check_triple_semantic`` explores the transition system from every data
  state satisfying the precondition and tests the postcondition wherever the
  program can terminate.
* ``check_derivation`` checks a proof tree against the rule schemas H1-H10,
  PH1, H10' and the consequence rule H9.  Consequence side conditions are
  decided in the attached data environment.
* ``check_sufficient_determinism`` looks for reachable choice points whose
  outgoing steps lead to different data states.

Proof files are indented rule trees, one node per line::

    // comments start with //
    H4 {wp(a, wp(b, phi))} a . b {phi}
      H1 {wp(a, wp(b, phi))} a {wp(b, phi)}
      H1 {wp(b, phi)} b {phi}

A child is indented further than its parent.  Inside the premises of an
H10/H10' node, ``hyp {alpha} X {beta}`` leaves assume the annotation of the
recursion variable X.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .config import DEFAULT_LIMITS, Limits
from .dataenv import (
    DataEnv, characteristic_guard, eval_guard, guard_equivalent, implies, satisfying,
    weakest_precondition,
)
from .equivalence import PSTEP, check
from .parser import HoareTriple, SpecFile, _Parser, pretty_guard, pretty_print
from .random_terms import random_guard
from .semantics import MissingDataEnv, build_plts, label_str
from .terms import (
    EMPTY_ALGEBRA, EMPTY_SPEC, Alt, AlgebraDecl, Atom, ConflictElim, Encap, EpsG, GuardAtom,
    GuardExpr, Hide, LeftMerge, LeftMergeG, PlusG, ProbAlt, RecSpec, RecVar, Seq, SeqG,
    Term, TermError, Whole, WpG, canonicalize, free_recvars,
)

RULES = ("H1", "H2", "H3", "PH1", "H4", "H5", "H6", "H7", "H8", "H9", "H10", "H10'")
_ALIASES = {"consequence": "H9", "H10p": "H10'"}
HYP = "hyp"


class HoareError(TermError):
    pass


class RuleMismatch(HoareError):
    def __init__(self, node: "ProofNode", why: str):
        where = f" (line {node.line})" if node.line else ""
        super().__init__(f"{node.rule}{where}: {why}")
        self.node = node


class SideConditionFails(HoareError):
    def __init__(self, node: "ProofNode", why: str):
        where = f" (line {node.line})" if node.line else ""
        super().__init__(f"{node.rule}{where}: {why}")
        self.node = node


class ProofSyntaxError(HoareError):
    pass


@dataclass
class ProofNode:
    rule: str
    conclusion: HoareTriple
    premises: list = field(default_factory=list)
    line: int = 0

    def rules_used(self) -> set:
        out = {self.rule}
        for p in self.premises:
            out |= p.rules_used()
        return out


def _env_of(spec: SpecFile) -> DataEnv:
    if spec.data_env is None:
        raise MissingDataEnv()
    return spec.data_env


# ---------------------------------------------------------------------------
# semantic check

def triple_counterexample(tr: HoareTriple, spec: SpecFile, limits: Limits = DEFAULT_LIMITS):
    """(start state, final state) violating the triple, or None if it holds."""
    env = _env_of(spec)
    for s in env.states:
        if not eval_guard(tr.pre, s, env):
            continue
        lts = build_plts(tr.program, spec.algebra, spec.recspec, env, limits, data=s)
        for st in lts.states:
            if st.can_terminate and not eval_guard(tr.post, st.data, env):
                return s, st.data
    return None


def check_triple_semantic(tr: HoareTriple, spec: SpecFile, limits: Limits = DEFAULT_LIMITS) -> bool:
    return triple_counterexample(tr, spec, limits) is None


def check_triple_by_equivalence(tr: HoareTriple, spec: SpecFile, relation: str = PSTEP,
                                limits: Limits = DEFAULT_LIMITS) -> bool:
    """The triple read as the law alpha.p = alpha.p.beta, checked from every data state."""
    env = _env_of(spec)
    lhs = Seq(GuardAtom(tr.pre), tr.program)
    rhs = Seq(lhs, GuardAtom(tr.post))
    for s in env.states:
        a = build_plts(lhs, spec.algebra, spec.recspec, env, limits, data=s)
        b = build_plts(rhs, spec.algebra, spec.recspec, env, limits, data=s)
        if not check(a, b, relation).equivalent:
            return False
    return True


# ---------------------------------------------------------------------------
# derivations

def _same(g1: GuardExpr, g2: GuardExpr) -> bool:
    return g1 == g2


def _eqt(t1: Term, t2: Term) -> bool:
    """Program identity up to associativity and commutativity of choice."""
    return canonicalize(t1) == canonicalize(t2)


def _is_linear_body(t: Term) -> bool:
    if isinstance(t, (Alt, ProbAlt)):
        return _is_linear_body(t.left) and _is_linear_body(t.right)
    if isinstance(t, Seq):
        head, tail = t.left, t.right
        if isinstance(head, GuardAtom):
            return _is_linear_body(tail)
        return _is_chain(head) and (isinstance(tail, RecVar) or _is_linear_body(tail) and not free_recvars(tail))
    return _is_chain(t) or isinstance(t, GuardAtom)


def _is_chain(t: Term) -> bool:
    if isinstance(t, Atom):
        return True
    return isinstance(t, LeftMerge) and _is_chain(t.left) and _is_chain(t.right)


def is_guarded_linear(spec: RecSpec) -> bool:
    """Bodies are sums and probabilistic sums of chains, chain.X, or guard-prefixed such summands."""
    return spec.guarded() and all(_is_linear_body(t) for _, t in spec.equations)


def _premises(node: ProofNode, k: int):
    if len(node.premises) != k:
        raise RuleMismatch(node, f"expects {k} premise(s), got {len(node.premises)}")
    return [p.conclusion for p in node.premises]


def check_derivation(node: ProofNode, spec: SpecFile) -> bool:
    """True if the tree instantiates the rule schemas; raises RuleMismatch or SideConditionFails otherwise."""
    _check_node(node, spec, None)
    return True


def _check_node(node: ProofNode, spec: SpecFile, hyps: dict | None):
    rule = _ALIASES.get(node.rule, node.rule)
    c = node.conclusion
    prog, pre, post = c.program, c.pre, c.post

    if rule == HYP:
        if hyps is None or not isinstance(prog, RecVar):
            raise RuleMismatch(node, "hypotheses are only allowed for recursion variables inside H10 premises")
        if hyps.get(prog.name) != (pre, post):
            raise RuleMismatch(node, f"hypothesis for {prog.name} does not match its annotation")
        return
    if rule not in RULES:
        raise RuleMismatch(node, f"unknown rule {node.rule!r}")

    if rule == "H1":
        _premises(node, 0)
        if not isinstance(prog, Atom):
            raise RuleMismatch(node, "program must be a single event")
        ok = pre == WpG(prog.name, post)
        if not ok and spec.data_env is not None:
            ok = guard_equivalent(pre, weakest_precondition(prog.name, post, spec.data_env), spec.data_env)
        if not ok:
            raise RuleMismatch(node, "precondition is not the weakest precondition of the event")
    elif rule == "H2":
        _premises(node, 0)
        if not isinstance(prog, GuardAtom):
            raise RuleMismatch(node, "program must be a guard")
        if post != SeqG(pre, prog.guard):
            raise RuleMismatch(node, "postcondition must be the precondition followed by the guard")
    elif rule in ("H3", "PH1"):
        kind = Alt if rule == "H3" else ProbAlt
        if not isinstance(prog, kind):
            raise RuleMismatch(node, f"program must be a {'choice' if rule == 'H3' else 'probabilistic choice'}")
        p1, p2 = _premises(node, 2)
        if rule == "H3":
            # choice is read modulo A1/A2, so any split of the summands will do
            matches = _eqt(Alt(p1.program, p2.program), prog)
        else:
            matches = _eqt(p1.program, prog.left) and _eqt(p2.program, prog.right)
        if not matches:
            raise RuleMismatch(node, "premise programs do not match the operands")
        for p in (p1, p2):
            if not (_same(p.pre, pre) and _same(p.post, post)):
                raise RuleMismatch(node, "premises must share the conclusion's pre- and postcondition")
    elif rule == "H4":
        if not isinstance(prog, Seq):
            raise RuleMismatch(node, "program must be a sequential composition")
        p1, p2 = _premises(node, 2)
        if not (_eqt(p1.program, prog.left) and _eqt(p2.program, prog.right)):
            raise RuleMismatch(node, "premise programs do not match the operands")
        if not _same(p1.pre, pre) or not _same(p2.post, post) or not _same(p1.post, p2.pre):
            raise RuleMismatch(node, "intermediate condition does not chain")
    elif rule == "H5":
        if not isinstance(prog, Whole):
            raise RuleMismatch(node, "program must be a whole parallel composition")
        p1, p2 = _premises(node, 2)
        if not (_eqt(p1.program, prog.left) and _eqt(p2.program, prog.right)):
            raise RuleMismatch(node, "premise programs do not match the operands")
        if pre != LeftMergeG(p1.pre, p2.pre) or post != LeftMergeG(p1.post, p2.post):
            raise RuleMismatch(node, "conditions must be the left merges of the premises' conditions")
    elif rule in ("H6", "H7", "H8"):
        kind = {"H6": ConflictElim, "H7": Encap, "H8": Hide}[rule]
        if not isinstance(prog, kind):
            raise RuleMismatch(node, f"program must be a {kind.__name__} application")
        (p1,) = _premises(node, 1)
        if not _eqt(p1.program, prog.arg) or not _same(p1.pre, pre) or not _same(p1.post, post):
            raise RuleMismatch(node, "premise must be the same triple for the operand")
    elif rule == "H9":
        (p1,) = _premises(node, 1)
        if not _eqt(p1.program, prog):
            raise RuleMismatch(node, "premise must be about the same program")
        env = _env_of(spec)
        if not implies(pre, p1.pre, env):
            raise SideConditionFails(node, f"{pretty_guard(pre)} does not imply {pretty_guard(p1.pre)}")
        if not implies(p1.post, post, env):
            raise SideConditionFails(node, f"{pretty_guard(p1.post)} does not imply {pretty_guard(post)}")
    else:  # H10, H10'
        _check_recursion(node, rule, spec)
        return
    for p in node.premises:
        _check_node(p, spec, hyps)


def _merge_parts(g: GuardExpr) -> list:
    if isinstance(g, LeftMergeG):
        return _merge_parts(g.left) + _merge_parts(g.right)
    return [g]


def _check_recursion(node: ProofNode, rule: str, spec: SpecFile):
    c = node.conclusion
    if not isinstance(c.program, RecVar):
        raise RuleMismatch(node, "conclusion must be about a recursion variable")
    rs = spec.recspec
    if not is_guarded_linear(rs):
        raise RuleMismatch(node, "the recursive specification is not guarded linear")
    annot = {}
    for p in node.premises:
        names = [n for n, t in rs.equations if _eqt(t, p.conclusion.program) and n not in annot]
        if not names:
            raise RuleMismatch(node, "every premise must be about the body of a distinct equation")
        annot[names[0]] = (p.conclusion.pre, p.conclusion.post)
    if set(annot) != {n for n, _ in rs.equations}:
        missing = sorted({n for n, _ in rs.equations} - set(annot))
        raise RuleMismatch(node, f"no premise for {', '.join(missing)}")
    if annot[c.program.name] != (c.pre, c.post):
        raise RuleMismatch(node, "conclusion does not carry the variable's annotation")
    if rule == "H10'":
        for pre, post in annot.values():
            if len(_merge_parts(pre)) != len(_merge_parts(post)):
                raise RuleMismatch(node, "pre- and postconditions must have matching left-merge arity")
    for p in node.premises:
        _check_node(p, spec, annot)


# ---------------------------------------------------------------------------
# proof files

def parse_proof(src: str, spec: SpecFile | None = None) -> ProofNode:
    rows = []
    for lineno, raw in enumerate(src.splitlines(), 1):
        text = raw.split("//", 1)[0].rstrip()
        if not text.strip():
            continue
        indent = len(text) - len(text.lstrip(" "))
        rows.append((lineno, indent, text.strip()))
    if not rows:
        raise ProofSyntaxError("empty proof")
    nodes, pos = _build(rows, 0, rows[0][1], spec)
    if pos != len(rows) or len(nodes) != 1:
        raise ProofSyntaxError("a proof has exactly one root node")
    return nodes[0]


def _build(rows, i, indent, spec):
    out = []
    while i < len(rows):
        lineno, ind, text = rows[i]
        if ind < indent:
            break
        if ind > indent:
            raise ProofSyntaxError(f"line {lineno}: unexpected indentation")
        node = _parse_line(lineno, text, spec)
        i += 1
        if i < len(rows) and rows[i][1] > indent:
            node.premises, i = _build(rows, i, rows[i][1], spec)
        out.append(node)
    return out, i


def _parse_line(lineno, text, spec):
    rule, _, rest = text.partition(" ")
    p = _Parser(rest)
    try:
        p.expect("{")
        pre = p.guard()
        p.expect("}")
        prog = canonicalize(p.term())
        p.expect("{")
        post = p.guard()
        p.expect("}")
        p.end()
    except TermError as exc:
        raise ProofSyntaxError(f"line {lineno}: {exc}") from None
    return ProofNode(rule, HoareTriple(pre, prog, post), [], lineno)


def format_proof(node: ProofNode, indent: int = 0) -> str:
    c = node.conclusion
    line = f"{' ' * indent}{node.rule} {{{pretty_guard(c.pre)}}} {pretty_print(c.program)} {{{pretty_guard(c.post)}}}"
    return "\n".join([line] + [format_proof(p, indent + 2) for p in node.premises])


# ---------------------------------------------------------------------------
# sufficient determinism

@dataclass
class DeterminismReport:
    flagged: list = field(default_factory=list)   # (state id, data state, term text, [(label, data')])
    states: int = 0

    @property
    def deterministic(self) -> bool:
        return not self.flagged

    def text(self) -> str:
        if not self.flagged:
            return f"sufficiently deterministic ({self.states} states explored)"
        lines = [f"{len(self.flagged)} nondeterministic point(s) in {self.states} states:"]
        for i, s, term, moves in self.flagged:
            outs = ", ".join(f"{lab} -> {d}" for lab, d in moves)
            lines.append(f"  state {i} at {s}: {term}\n    {outs}")
        return "\n".join(lines)


def check_sufficient_determinism(spec: SpecFile, root: Term | None = None, all_starts: bool = False,
                                 limits: Limits = DEFAULT_LIMITS) -> DeterminismReport:
    """Flag reachable resolved states whose steps lead to more than one data state.

    Guards are already decided in a resolved state, so a choice that guards
    disambiguate leaves a single live branch and is never flagged.
    """
    env = _env_of(spec)
    root = root if root is not None else spec.root
    if root is None:
        raise HoareError("no root term to check")
    report = DeterminismReport()
    starts = env.states if all_starts else (env.initial,)
    for s in starts:
        lts = build_plts(root, spec.algebra, spec.recspec, env, limits, data=s)
        report.states += len(lts.states)
        for i, st in enumerate(lts.states):
            if st.kind != "resolved":
                continue
            moves = sorted({(label_str(lab), lts.states[j].data) for lab, j in lts.act_edges.get(i, [])})
            if len({d for _, d in moves}) > 1:
                report.flagged.append((i, st.data, pretty_print(st.term), moves))
    return report


# ---------------------------------------------------------------------------
# random derivations (valid by construction)

@dataclass(frozen=True)
class DerivationShape:
    events: tuple = ("a", "b", "c")
    atoms: tuple = ("phi", "psi")
    rules: tuple = ("H1", "H2", "H3", "PH1", "H4", "H5", "H6", "H7", "H8", "H10")
    probs: tuple = ()


def random_derivation(rng: random.Random, spec: SpecFile, depth: int = 3,
                      shape: DerivationShape = DerivationShape()) -> tuple[ProofNode, SpecFile]:
    """A derivation accepted by check_derivation, plus the spec file it refers to.

    H10 nodes replace the equations by a fresh guarded linear one; the
    other rules leave the equations untouched.
    """
    from .random_terms import PROBS
    probs = shape.probs or PROBS
    gen = _DerivGen(rng, spec, shape, probs)
    post = random_guard(rng, list(shape.atoms), rng.randint(1, 2))
    node = gen.to_post(post, depth)
    return node, gen.spec


class _DerivGen:
    def __init__(self, rng, spec, shape, probs):
        self.rng, self.spec, self.shape, self.probs = rng, spec, shape, probs
        self.env = _env_of(spec)
        self.used_rec = False

    def weaken(self, node: ProofNode, pre: GuardExpr, post: GuardExpr) -> ProofNode:
        c = node.conclusion
        if (pre, post) == (c.pre, c.post):
            return node
        assert implies(pre, c.pre, self.env) and implies(c.post, post, self.env)
        return ProofNode("H9", HoareTriple(pre, c.program, post), [node])

    def to_post(self, post: GuardExpr, depth: int) -> ProofNode:
        rng = self.rng
        rules = [r for r in self.shape.rules if depth > 0 or r in ("H1", "H2")]
        if self.used_rec:
            rules = [r for r in rules if r != "H10"]
        rule = rng.choice(rules)
        if rule == "H1":
            e = rng.choice(self.shape.events)
            return ProofNode("H1", HoareTriple(WpG(e, post), Atom(e), post))
        if rule == "H2":
            phi = random_guard(rng, list(self.shape.atoms), 1)
            inner = ProofNode("H2", HoareTriple(post, GuardAtom(phi), SeqG(post, phi)))
            return self.weaken(inner, post, post)
        if rule in ("H3", "PH1"):
            d1, d2 = self.to_post(post, depth - 1), self.to_post(post, depth - 1)
            pre = SeqG(d1.conclusion.pre, d2.conclusion.pre)
            d1, d2 = self.weaken(d1, pre, post), self.weaken(d2, pre, post)
            t1, t2 = d1.conclusion.program, d2.conclusion.program
            prog = Alt(t1, t2) if rule == "H3" else ProbAlt(t1, rng.choice(self.probs), t2)
            return ProofNode(rule, HoareTriple(pre, prog, post), [d1, d2])
        if rule == "H4":
            d2 = self.to_post(post, depth - 1)
            d1 = self.to_post(d2.conclusion.pre, depth - 1)
            prog = Seq(d1.conclusion.program, d2.conclusion.program)
            return ProofNode("H4", HoareTriple(d1.conclusion.pre, prog, post), [d1, d2])
        if rule == "H5":
            other = random_guard(rng, list(self.shape.atoms), 1)
            d1, d2 = self.to_post(post, depth - 1), self.to_post(other, depth - 1)
            c1, c2 = d1.conclusion, d2.conclusion
            inner = ProofNode("H5", HoareTriple(LeftMergeG(c1.pre, c2.pre), Whole(c1.program, c2.program),
                                                LeftMergeG(post, other)), [d1, d2])
            return self.weaken(inner, inner.conclusion.pre, post)
        if rule in ("H6", "H7", "H8"):
            d = self.to_post(post, depth - 1)
            c = d.conclusion
            if rule == "H6":
                prog = ConflictElim(c.program)
            else:
                evs = frozenset(rng.sample(self.shape.events, 1))
                prog = Encap(evs, c.program) if rule == "H7" else Hide(evs, c.program)
            return ProofNode(rule, HoareTriple(c.pre, prog, post), [d])
        return self.recursion(post)

    def recursion(self, post: GuardExpr) -> ProofNode:
        """H10 over a fresh linear spec with an effect-closed invariant, then weakened to post."""
        from .random_terms import random_linear_spec
        rng, env = self.rng, self.env
        self.used_rec = True
        events = self.shape.events
        spec = random_linear_spec(rng, rng.randint(1, 3), events, self.probs, prefix="H")
        inv_states = set(satisfying(post, env))
        # shrink to the largest subset of post closed under every event's effect
        changed = True
        while changed:
            changed = False
            for s in list(inv_states):
                if any(not env.effect(e, s) <= inv_states for e in events):
                    inv_states.discard(s)
                    changed = True
        inv = characteristic_guard(inv_states, env)
        premises = [self._body_proof(body, inv) for _, body in spec.equations]
        root = spec.equations[0][0]
        self.spec = SpecFile(self.spec.algebra, spec, env, self.spec.root, self.spec.triples, [])
        node = ProofNode("H10", HoareTriple(inv, RecVar(root), inv), premises)
        return self.weaken(node, inv, post)

    def _body_proof(self, t: Term, inv: GuardExpr) -> ProofNode:
        if isinstance(t, (Alt, ProbAlt)):
            d1, d2 = self._body_proof(t.left, inv), self._body_proof(t.right, inv)
            return ProofNode("H3" if isinstance(t, Alt) else "PH1", HoareTriple(inv, t, inv), [d1, d2])
        if isinstance(t, Seq):
            d2 = ProofNode(HYP, HoareTriple(inv, t.right, inv))
            d1 = self._event_proof(t.left, inv)
            return ProofNode("H4", HoareTriple(inv, t, inv), [d1, d2])
        return self._event_proof(t, inv)

    def _event_proof(self, e: Atom, inv: GuardExpr) -> ProofNode:
        h1 = ProofNode("H1", HoareTriple(WpG(e.name, inv), e, inv))
        return self.weaken(h1, inv, inv)

