"""Concrete ASCII syntax for terms, guards and spec files, plus a round-tripping printer.

Operator precedence, tightest first: prefix operators, ``.``, ``|>`` and ``|``,
``||``, ``&``, ``<<``, ``+``, ``+[p]``.  All binary operators associate to the
left.  Identifiers starting with an upper-case letter are recursion
variables; all other identifiers outside guard brackets are events.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .dataenv import DataEnv, DataEnvError, guard_equivalent, weakest_precondition
from .terms import (
    DELTA, EPS, RESERVED, TAU_T, AlgebraDecl, Alt, Atom, AtomGuard, BadProbability,
    Breve, Comm, ConflictElim, Delta, DeltaG, Encap, EpsG, Epsilon, GuardAtom,
    GuardExpr, Hide, LeftMerge, LeftMergeG, NotG, Par, PlusG, ProbAlt, ProbG,
    Project, RecSpec, RecVar, Resolved, Seq, SeqG, StateSetG, Tau, Term, TermError,
    Unless, UndefinedRecVar, Whole, WpG, atoms_of, canonicalize, free_recvars,
    guard_atoms, subterms, summands,
)


class TermSyntaxError(TermError):
    def __init__(self, pos: int, expected, found: str, src: str = ""):
        self.pos = pos
        self.expected = sorted(set(expected))
        self.found = found
        line = src.count("\n", 0, pos) + 1
        col = pos - (src.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"line {line}, column {col}: expected {' or '.join(self.expected)}, found {found!r}")


class UnknownEvent(TermError):
    def __init__(self, name):
        super().__init__(f"event {name} is not declared")
        self.name = name


class DuplicateEquation(TermError):
    def __init__(self, name):
        super().__init__(f"recursion variable {name} defined twice")
        self.name = name


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<prob>\+\[\s*(?P<pval>-?[0-9]+(?:/[0-9]+|\.[0-9]+)?)\s*\])
  | (?P<num>[0-9]+(?:/[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>\|\||\|>|<<|<=|\#p|[|&+.()\[\]{},;=!~#%@])
""", re.VERBOSE)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    pos: int


def tokenize(src: str) -> list[Tok]:
    out = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise TermSyntaxError(pos, ["token"], src[pos], src)
        kind = m.lastgroup
        if kind == "pval":
            kind = "prob"
        if kind != "ws":
            text = m.group("pval") if kind == "prob" else m.group(0)
            out.append(Tok(kind, text, pos))
        pos = m.end()
    out.append(Tok("eof", "", len(src)))
    return out


def parse_probability(text: str) -> Fraction:
    try:
        p = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise BadProbability(text) from None
    if not 0 < p < 1:
        raise BadProbability(p)
    return p


# ---------------------------------------------------------------------------
# recursive descent

_TERM_LEVELS = [("prob",), ("+",), ("<<",), ("&",), ("||",), ("|>", "|"), (".",)]
_BINOPS = {"+": Alt, "<<": Unless, "&": Whole, "||": Par, "|>": LeftMerge, "|": Comm, ".": Seq}
_GUARD_LEVELS = [("prob",), ("+",), ("|>",), (".",)]
_GBINOPS = {"+": PlusG, "|>": LeftMergeG, ".": SeqG}


class _Parser:
    def __init__(self, src: str, algebra: AlgebraDecl | None = None):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0
        self.algebra = algebra
        self.events_seen: set[str] = set()

    # token helpers
    @property
    def cur(self) -> Tok:
        return self.toks[self.i]

    def at(self, *texts) -> bool:
        t = self.cur
        if t.kind in ("prob", "eof"):
            return t.kind in texts
        return t.kind == "op" and t.text in texts

    def advance(self) -> Tok:
        t = self.cur
        self.i += 1
        return t

    def fail(self, expected):
        t = self.cur
        raise TermSyntaxError(t.pos, expected, t.text or "end of input", self.src)

    def expect(self, text) -> Tok:
        if not self.at(text):
            self.fail([repr(text)])
        return self.advance()

    def ident(self) -> str:
        if self.cur.kind != "ident":
            self.fail(["identifier"])
        return self.advance().text

    def natural(self) -> int:
        if self.cur.kind != "num" or "/" in self.cur.text:
            self.fail(["natural number"])
        return int(self.advance().text)

    def ident_list(self, close: str) -> list[str]:
        names = []
        if self.at(close):
            return names
        names.append(self.ident())
        while self.at(","):
            self.advance()
            names.append(self.ident())
        return names

    # terms
    def term(self, level: int = 0) -> Term:
        if level == len(_TERM_LEVELS):
            return self.unary()
        ops = _TERM_LEVELS[level]
        left = self.term(level + 1)
        while self.at(*ops):
            tok = self.advance()
            right = self.term(level + 1)
            if tok.kind == "prob":
                left = ProbAlt(left, parse_probability(tok.text), right)
            else:
                left = _BINOPS[tok.text](left, right)
        return left

    def unary(self) -> Term:
        if self.at("!"):
            self.advance()
            return GuardAtom(NotG(self.guard_unary()))
        if self.at("~"):
            self.advance()
            inner = self.primary()
            if not isinstance(inner, (Atom, Delta, Epsilon, Tau)):
                self.fail(["event or constant after '~'"])
            return Breve(inner)
        return self.primary()

    def primary(self) -> Term:
        t = self.cur
        if t.kind == "ident":
            name = t.text
            if name == "delta":
                self.advance()
                return DELTA
            if name == "eps":
                self.advance()
                return EPS
            if name == "tau":
                self.advance()
                return TAU_T
            if name == "theta":
                self.advance()
                return ConflictElim(self.paren_term())
            if name in ("encap", "hide"):
                self.advance()
                self.expect("{")
                evs = self.ident_list("}")
                self.expect("}")
                for e in evs:
                    self.note_event(e, t.pos)
                arg = self.paren_term()
                return Encap(evs, arg) if name == "encap" else Hide(evs, arg)
            if name == "pi":
                self.advance()
                self.expect("[")
                n = self.natural()
                self.expect("]")
                return Project(n, self.paren_term())
            if name == "frozen":
                self.advance()
                return Resolved(self.paren_term())
            if name in RESERVED:
                self.fail(["term"])
            self.advance()
            if name[0].isupper():
                return RecVar(name)
            self.note_event(name, t.pos)
            return Atom(name)
        if self.at("("):
            return self.paren_term()
        if self.at("["):
            self.advance()
            g = self.guard()
            self.expect("]")
            return GuardAtom(g)
        self.fail(["term"])

    def paren_term(self) -> Term:
        self.expect("(")
        t = self.term()
        self.expect(")")
        return t

    def note_event(self, name: str, pos: int):
        if self.algebra is not None and name not in self.algebra.events:
            raise UnknownEvent(name)
        self.events_seen.add(name)

    # guards
    def guard(self, level: int = 0) -> GuardExpr:
        if level == len(_GUARD_LEVELS):
            return self.guard_unary()
        ops = _GUARD_LEVELS[level]
        left = self.guard(level + 1)
        while self.at(*ops):
            tok = self.advance()
            right = self.guard(level + 1)
            if tok.kind == "prob":
                left = ProbG(left, parse_probability(tok.text), right)
            else:
                left = _GBINOPS[tok.text](left, right)
        return left

    def guard_unary(self) -> GuardExpr:
        if self.at("!"):
            self.advance()
            return NotG(self.guard_unary())
        t = self.cur
        if self.at("("):
            self.advance()
            g = self.guard()
            self.expect(")")
            return g
        if self.at("@"):
            self.advance()
            self.expect("{")
            names = self.ident_list("}")
            self.expect("}")
            return StateSetG(frozenset(names))
        if t.kind == "ident":
            if t.text == "delta":
                self.advance()
                return DeltaG()
            if t.text == "eps":
                self.advance()
                return EpsG()
            if t.text == "wp":
                self.advance()
                self.expect("(")
                e = self.ident()
                self.expect(",")
                g = self.guard()
                self.expect(")")
                return WpG(e, g)
            if t.text in RESERVED:
                self.fail(["guard"])
            self.advance()
            return AtomGuard(t.text)
        self.fail(["guard"])

    def end(self, *closers):
        if not self.at("eof", *closers):
            self.fail(["operator", "end of input"] + [repr(c) for c in closers])


def parse_term(src: str, algebra: AlgebraDecl | None = None) -> Term:
    """Parse a term; with an algebra, undeclared events raise UnknownEvent.  Result is canonical."""
    p = _Parser(src, algebra)
    t = p.term()
    p.end()
    return canonicalize(t)


def parse_guard(src: str) -> GuardExpr:
    p = _Parser(src)
    g = p.guard()
    p.end()
    return g


# ---------------------------------------------------------------------------
# spec files

@dataclass(frozen=True)
class HoareTriple:
    pre: GuardExpr
    program: Term
    post: GuardExpr


@dataclass
class SpecFile:
    algebra: AlgebraDecl = field(default_factory=AlgebraDecl)
    recspec: RecSpec = field(default_factory=RecSpec)
    data_env: DataEnv | None = None
    root: Term | None = None
    triples: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def parse_spec_file(src: str) -> SpecFile:
    p = _Parser(src)
    events: list[str] = []
    comm: dict = {}
    order, conflicts, pconflicts, races = [], [], [], []
    equations: dict[str, Term] = {}
    root = None
    states: list[str] = []
    init = None
    tests: dict[str, set] = {}
    effects: dict = {}
    wp_claims = []
    triples = []
    warnings = []

    while not p.at("eof"):
        kw = p.cur
        if kw.kind != "ident":
            p.fail(["statement keyword"])
        word = p.advance().text
        if word == "events":
            events += p.ident_list(";")
        elif word == "comm":
            a, b = p.ident(), p.ident()
            p.expect("=")
            c = p.ident()
            if (b, a) in comm and comm[(b, a)] != c:
                raise TermError(f"communication of {a} and {b} declared twice")
            comm[(a, b)] = c
        elif word == "order":
            a = p.ident()
            p.expect("<=")
            b = p.ident()
            if a != b:
                order.append((a, b))
        elif word == "conflict":
            a = p.ident()
            p.expect("#")
            conflicts.append((a, p.ident()))
        elif word == "pconflict":
            a = p.ident()
            p.expect("#p")
            pconflicts.append((a, p.ident()))
        elif word == "race":
            a = p.ident()
            p.expect("%")
            races.append((a, p.ident()))
        elif word == "eq":
            name = p.ident()
            if not name[0].isupper():
                p.fail(["recursion variable (upper-case identifier)"])
            p.expect("=")
            if name in equations:
                raise DuplicateEquation(name)
            equations[name] = canonicalize(p.term())
        elif word == "root":
            root = canonicalize(p.term())
        elif word in ("state", "states"):
            states += p.ident_list(";")
        elif word == "init":
            init = p.ident()
        elif word == "test":
            g = p.ident()
            p.expect("@")
            s = p.ident()
            p.expect("=")
            val = p.ident()
            if val not in ("true", "false"):
                p.fail(["true", "false"])
            tests.setdefault(g, set())
            if val == "true":
                tests[g].add(s)
        elif word == "effect":
            e = p.ident()
            p.expect("@")
            s = p.ident()
            p.expect("=")
            p.expect("{")
            succ = p.ident_list("}")
            p.expect("}")
            effects[(e, s)] = frozenset(succ)
        elif word == "wp":
            e = p.ident()
            post = p.guard()
            p.expect("=")
            wp_claims.append((e, post, p.guard()))
        elif word == "hoare":
            p.expect("{")
            pre = p.guard()
            p.expect("}")
            prog = canonicalize(p.term())
            p.expect("{")
            post = p.guard()
            p.expect("}")
            triples.append(HoareTriple(pre, prog, post))
        else:
            p.fail(["statement keyword"])
        p.expect(";")

    spec = RecSpec(tuple(equations.items()))
    spec.validate()
    if root is not None:
        for v in free_recvars(root):
            if v not in spec:
                raise UndefinedRecVar(v)
    used = set(p.events_seen) | {c for c in comm.values() if c != "delta"}
    for (a, b) in comm:
        used |= {a, b}
    for rel in (order, conflicts, pconflicts, races):
        for a, b in rel:
            used |= {a, b}
    for (e, _s) in effects:
        used.add(e)
    bad = sorted(x for x in used | set(events) if x in RESERVED or x[0].isupper())
    if bad:
        raise TermError(f"invalid event names: {', '.join(bad)}")
    undeclared = sorted(used - set(events))
    if undeclared:
        warnings.append(f"auto-declared events: {', '.join(undeclared)}")
    algebra = AlgebraDecl.build(events=set(events) | used, comm=comm, order=order,
                                conflicts=conflicts, prob_conflicts=pconflicts, races=races)
    warnings += algebra.warnings()

    env = None
    if states or tests or effects:
        if not states:
            raise DataEnvError("data environment needs a 'state' declaration")
        env = DataEnv(tuple(states), {g: frozenset(v) for g, v in tests.items()}, effects, init)
        for e, post, claimed in wp_claims:
            if not guard_equivalent(claimed, weakest_precondition(e, post, env), env):
                raise DataEnvError(f"declared wp({e}, ...) disagrees with the computed weakest precondition")
    elif wp_claims:
        raise DataEnvError("wp declarations need a data environment")
    return SpecFile(algebra, spec, env, root, triples, warnings)


# ---------------------------------------------------------------------------
# printing

_LEVEL = {ProbAlt: 0, Alt: 1, Unless: 2, Whole: 3, Par: 4, LeftMerge: 5, Comm: 5, Seq: 6}
_SYMBOL = {Unless: "<<", Whole: "&", Par: "||", LeftMerge: "|>", Comm: "|", Seq: "."}
_GLEVEL = {ProbG: 0, PlusG: 1, LeftMergeG: 2, SeqG: 3}
_GSYMBOL = {PlusG: "+", LeftMergeG: "|>", SeqG: "."}


def format_prob(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def pretty_guard(g: GuardExpr, level: int = 0) -> str:
    cls = type(g)
    if cls is AtomGuard:
        return g.name
    if cls is DeltaG:
        return "delta"
    if cls is EpsG:
        return "eps"
    if cls is NotG:
        return "!" + pretty_guard(g.arg, 4)
    if cls is WpG:
        return f"wp({g.event}, {pretty_guard(g.post)})"
    if cls is StateSetG:
        return "@{" + ",".join(sorted(g.states)) + "}"
    lv = _GLEVEL[cls]
    if cls is ProbG:
        s = f"{pretty_guard(g.left, 0)} +[{format_prob(g.prob)}] {pretty_guard(g.right, 1)}"
    else:
        s = f"{pretty_guard(g.left, lv)} {_GSYMBOL[cls]} {pretty_guard(g.right, lv + 1)}"
    return f"({s})" if lv < level else s


def pretty_print(t: Term, level: int = 0) -> str:
    cls = type(t)
    if cls is Atom:
        return t.name
    if cls is Delta:
        return "delta"
    if cls is Epsilon:
        return "eps"
    if cls is Tau:
        return "tau"
    if cls is RecVar:
        return t.name
    if cls is GuardAtom:
        return "[" + pretty_guard(t.guard) + "]"
    if cls is Breve:
        return "~" + pretty_print(t.arg, 7)
    if cls is ConflictElim:
        return f"theta({pretty_print(t.arg)})"
    if cls is Resolved:
        return f"frozen({pretty_print(t.arg)})"
    if cls is Encap:
        return "encap{" + ",".join(sorted(t.events)) + "}(" + pretty_print(t.arg) + ")"
    if cls is Hide:
        return "hide{" + ",".join(sorted(t.events)) + "}(" + pretty_print(t.arg) + ")"
    if cls is Project:
        return f"pi[{t.depth}]({pretty_print(t.arg)})"
    lv = _LEVEL[cls]
    if cls is Alt:
        s = " + ".join(pretty_print(x, 2) for x in summands(t))
    elif cls is ProbAlt:
        s = f"{pretty_print(t.left, 0)} +[{format_prob(t.prob)}] {pretty_print(t.right, 1)}"
    else:
        s = f"{pretty_print(t.left, lv)} {_SYMBOL[cls]} {pretty_print(t.right, lv + 1)}"
    return f"({s})" if lv < level else s


def format_spec_file(sf: SpecFile) -> str:
    """Render a spec file back to concrete syntax."""
    alg = sf.algebra
    lines = []
    if alg.events:
        lines.append("events " + ", ".join(sorted(alg.events)) + ";")
    for (a, b), c in alg.comm:
        lines.append(f"comm {a} {b} = {c};")
    for a, b in sorted(alg.causal_order):
        lines.append(f"order {a} <= {b};")
    for kw, sym, rel in (("conflict", "#", alg.conflicts), ("pconflict", "#p", alg.prob_conflicts),
                         ("race", "%", alg.races)):
        for pair in sorted(tuple(sorted(p)) for p in rel):
            lines.append(f"{kw} {pair[0]} {sym} {pair[1]};")
    env = sf.data_env
    if env is not None:
        lines.append("state " + ", ".join(env.states) + ";")
        if env.initial != env.states[0]:
            lines.append(f"init {env.initial};")
        for g in sorted(env.tests):
            for s in env.states:
                lines.append(f"test {g} @ {s} = {'true' if s in env.tests[g] else 'false'};")
        for (e, s), succ in sorted(env.effects.items()):
            lines.append(f"effect {e} @ {s} = {{{', '.join(sorted(succ))}}};")
    for name, body in sf.recspec.equations:
        lines.append(f"eq {name} = {pretty_print(body)};")
    if sf.root is not None:
        lines.append(f"root {pretty_print(sf.root)};")
    for tr in sf.triples:
        lines.append(f"hoare {{ {pretty_guard(tr.pre)} }} {pretty_print(tr.program)} {{ {pretty_guard(tr.post)} }};")
    return "\n".join(lines) + "\n"
