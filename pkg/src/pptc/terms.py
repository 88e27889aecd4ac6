"""Process terms, guard expressions, algebra declarations and structural utilities.

Terms are hash-consed: constructing the same node twice returns the same
object, so equality and hashing are identity based and cheap.  Every node
is immutable.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

RESERVED = frozenset({"delta", "eps", "tau", "theta", "encap", "hide", "pi", "wp", "frozen"})
TAU = "tau"


class TermError(ValueError):
    pass


class BadProbability(TermError):
    def __init__(self, value):
        super().__init__(f"probability {value} outside the open interval (0,1)")
        self.value = value


# ---------------------------------------------------------------------------
# hash-consed node base

class _Node:
    __slots__ = ("_args", "_skey", "_size", "__weakref__")
    _fields: tuple[str, ...] = ()
    _table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()

    def __new__(cls, *args):
        args = cls._check(args)
        key = (cls, args)
        obj = _Node._table.get(key)
        if obj is None:
            obj = object.__new__(cls)
            obj._args = args
            obj._skey = None
            obj._size = None
            _Node._table[key] = obj
        return obj

    @classmethod
    def _check(cls, args):
        if len(args) != len(cls._fields):
            raise TypeError(f"{cls.__name__} takes {len(cls._fields)} arguments")
        return tuple(args)

    def __reduce__(self):
        return (self.__class__, self._args)

    def __copy__(self):
        return self

    def __deepcopy__(self, memo):
        return self

    def __setattr__(self, name, value):
        if name in ("_args", "_skey", "_size"):
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("terms are immutable")

    def __repr__(self):
        inner = ", ".join(repr(a) for a in self._args)
        return f"{self.__class__.__name__}({inner})"


def _fields(*names):
    def deco(cls):
        cls._fields = names
        for i, n in enumerate(names):
            setattr(cls, n, property(lambda self, i=i: self._args[i]))
        return cls
    return deco


# ---------------------------------------------------------------------------
# guard expressions

class GuardExpr(_Node):
    __slots__ = ()


@_fields("name")
class AtomGuard(GuardExpr):
    __slots__ = ()


@_fields("arg")
class NotG(GuardExpr):
    __slots__ = ()


@_fields("left", "right")
class PlusG(GuardExpr):
    __slots__ = ()


@_fields("left", "prob", "right")
class ProbG(GuardExpr):
    __slots__ = ()

    @classmethod
    def _check(cls, args):
        left, p, right = args
        return (left, _prob(p), right)


@_fields("left", "right")
class SeqG(GuardExpr):
    __slots__ = ()


@_fields("left", "right")
class LeftMergeG(GuardExpr):
    __slots__ = ()


@_fields()
class DeltaG(GuardExpr):
    __slots__ = ()


@_fields()
class EpsG(GuardExpr):
    __slots__ = ()


@_fields("event", "post")
class WpG(GuardExpr):
    """Weakest precondition of an event for a guard, evaluated against a data environment."""
    __slots__ = ()


@_fields("states")
class StateSetG(GuardExpr):
    """Guard holding exactly in an explicit set of data states."""
    __slots__ = ()

    @classmethod
    def _check(cls, args):
        return (frozenset(args[0]),)


def guard_atoms(g: GuardExpr) -> set[str]:
    out: set[str] = set()
    stack = [g]
    while stack:
        x = stack.pop()
        if isinstance(x, AtomGuard):
            out.add(x.name)
        elif isinstance(x, WpG):
            stack.append(x.post)
        else:
            stack.extend(a for a in x._args if isinstance(a, GuardExpr))
    return out


# ---------------------------------------------------------------------------
# process terms

class Term(_Node):
    __slots__ = ()

    def __add__(self, other):
        return Alt(self, other)

    def __mul__(self, other):
        return Seq(self, other)


@_fields("name")
class Atom(Term):
    __slots__ = ()

    @classmethod
    def _check(cls, args):
        (name,) = args
        if not isinstance(name, str) or not name or name in RESERVED:
            raise TermError(f"bad event name {name!r}")
        return (name,)


@_fields()
class Delta(Term):
    __slots__ = ()


@_fields()
class Epsilon(Term):
    __slots__ = ()


@_fields()
class Tau(Term):
    __slots__ = ()


@_fields("guard")
class GuardAtom(Term):
    __slots__ = ()


@_fields("left", "right")
class Seq(Term):
    __slots__ = ()


@_fields("left", "right")
class Alt(Term):
    __slots__ = ()


@_fields("left", "prob", "right")
class ProbAlt(Term):
    """Probabilistic choice.  Degenerate weights collapse to the surviving operand."""
    __slots__ = ()

    def __new__(cls, left, prob, right):
        p = Fraction(prob)
        if p == 1:
            return left
        if p == 0:
            return right
        return super().__new__(cls, left, p, right)

    @classmethod
    def _check(cls, args):
        left, p, right = args
        return (left, _prob(p), right)


@_fields("left", "right")
class Whole(Term):
    """Whole parallel composition: parallel steps plus communications."""
    __slots__ = ()


@_fields("left", "right")
class Par(Term):
    __slots__ = ()


@_fields("left", "right")
class LeftMerge(Term):
    __slots__ = ()


@_fields("left", "right")
class Comm(Term):
    __slots__ = ()


@_fields("arg")
class ConflictElim(Term):
    __slots__ = ()


@_fields("left", "right")
class Unless(Term):
    __slots__ = ()


@_fields("events", "arg")
class Encap(Term):
    __slots__ = ()

    @classmethod
    def _check(cls, args):
        return (frozenset(args[0]), args[1])


@_fields("events", "arg")
class Hide(Term):
    __slots__ = ()

    @classmethod
    def _check(cls, args):
        return (frozenset(args[0]), args[1])


@_fields("depth", "arg")
class Project(Term):
    __slots__ = ()

    @classmethod
    def _check(cls, args):
        n, t = args
        if not isinstance(n, int) or n < 0:
            raise TermError(f"projection depth must be a natural number, got {n!r}")
        return (n, t)


@_fields("name")
class RecVar(Term):
    __slots__ = ()


@_fields("arg")
class Breve(Term):
    """Resolved counterpart of an atomic term (an event, tau, delta or eps)."""
    __slots__ = ()


@_fields("arg")
class Resolved(Term):
    """A frozen, already resolved term embedded in a residual."""
    __slots__ = ()


DELTA = Delta()
EPS = Epsilon()
TAU_T = Tau()

BINARY = (Seq, Alt, Whole, Par, LeftMerge, Comm, Unless)
CONSTANTS = (Delta, Epsilon, Tau)


def _prob(p) -> Fraction:
    try:
        q = Fraction(p)
    except (TypeError, ValueError):
        raise BadProbability(p) from None
    if not 0 < q < 1:
        raise BadProbability(q)
    return q


def children(t: Term) -> tuple[Term, ...]:
    return tuple(a for a in t._args if isinstance(a, Term))


def rebuild(t: Term, kids: Iterable[Term]) -> Term:
    it = iter(kids)
    args = [next(it) if isinstance(a, Term) else a for a in t._args]
    if isinstance(t, Alt):
        return Alt(*args)
    return type(t)(*args)


def subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(children(x))


def size(t: Term) -> int:
    if t._size is None:
        t._size = 1 + sum(size(c) for c in children(t))
    return t._size


# ---------------------------------------------------------------------------
# total order and canonical form

_TAGS = {cls: i for i, cls in enumerate(
    (Seq, Alt, ProbAlt, Whole, Par, LeftMerge, Comm, ConflictElim, Unless,
     Encap, Hide, Project, RecVar, Breve, Resolved))}
_CONST_RANK = {Delta: 0, Epsilon: 1, Tau: 2}
_GTAGS = {cls: i for i, cls in enumerate(
    (DeltaG, EpsG, AtomGuard, NotG, PlusG, ProbG, SeqG, LeftMergeG, WpG, StateSetG))}


def guard_key(g: GuardExpr):
    if g._skey is None:
        parts = []
        for a in g._args:
            if isinstance(a, GuardExpr):
                parts.append(guard_key(a))
            elif isinstance(a, Fraction):
                parts.append((a.numerator, a.denominator))
            elif isinstance(a, frozenset):
                parts.append(tuple(sorted(a)))
            else:
                parts.append(a)
        g._skey = (_GTAGS[type(g)], tuple(parts))
    return g._skey


def term_key(t: Term):
    """Sort key of the fixed total term order: constants < atoms < guards < composites."""
    if t._skey is None:
        cls = type(t)
        if cls in _CONST_RANK:
            k = (0, _CONST_RANK[cls])
        elif cls is Atom:
            k = (1, t.name)
        elif cls is GuardAtom:
            k = (2, guard_key(t.guard))
        else:
            parts = []
            for a in t._args:
                if isinstance(a, Term):
                    parts.append(term_key(a))
                elif isinstance(a, Fraction):
                    parts.append((a.numerator, a.denominator))
                elif isinstance(a, frozenset):
                    parts.append(tuple(sorted(a)))
                else:
                    parts.append(a)
            k = (3, _TAGS[cls], tuple(parts))
        t._skey = k
    return t._skey


def summands(t: Term) -> list[Term]:
    out = []
    stack = [t]
    while stack:
        x = stack.pop()
        if isinstance(x, Alt):
            stack.append(x.right)
            stack.append(x.left)
        else:
            out.append(x)
    return out


def alt_of(terms: Iterable[Term]) -> Term:
    """Right-nested sum of the given summands in canonical order."""
    items = []
    for t in terms:
        items.extend(summands(t))
    if not items:
        return DELTA
    items.sort(key=term_key)
    acc = items[-1]
    for x in reversed(items[:-1]):
        acc = Alt(x, acc)
    return acc


_canon_cache: "weakref.WeakKeyDictionary[Term, Term]" = weakref.WeakKeyDictionary()


def canonicalize(t: Term) -> Term:
    """Flatten + and sort its operands under the fixed term order (A1/A2 only)."""
    hit = _canon_cache.get(t)
    if hit is not None:
        return hit
    if isinstance(t, Alt):
        res = alt_of(canonicalize(s) for s in summands(t))
    else:
        kids = children(t)
        res = rebuild(t, [canonicalize(k) for k in kids]) if kids else t
    _canon_cache[t] = res
    _canon_cache[res] = res
    return res


# ---------------------------------------------------------------------------
# variables

def substitute(t: Term, bindings: Mapping[str, Term]) -> Term:
    if isinstance(t, RecVar):
        return bindings.get(t.name, t)
    kids = children(t)
    if not kids:
        return t
    return rebuild(t, [substitute(k, bindings) for k in kids])


def free_recvars(t: Term) -> set[str]:
    return {x.name for x in subterms(t) if isinstance(x, RecVar)}


def atoms_of(t: Term) -> set[str]:
    """Event names occurring syntactically in t (without following recursion)."""
    out = set()
    for x in subterms(t):
        if isinstance(x, Atom):
            out.add(x.name)
        elif isinstance(x, Tau):
            out.add(TAU)
    return out


def has_guards(t: Term) -> bool:
    return any(isinstance(x, GuardAtom) for x in subterms(t))


def prob_free(t: Term) -> bool:
    """True if resolving t is deterministic: no choice weight before the first prefix."""
    if isinstance(t, ProbAlt):
        return False
    if isinstance(t, (Atom, Delta, Epsilon, Tau, GuardAtom, Breve)):
        return True
    if isinstance(t, Seq):
        return prob_free(t.left) and (not may_terminate(t.left) or prob_free(t.right))
    if isinstance(t, (Alt, Whole, Par, LeftMerge, Comm)):
        return prob_free(t.left) and prob_free(t.right)
    if isinstance(t, Unless):
        return prob_free(t.left)
    if isinstance(t, (ConflictElim, Encap, Hide)):
        return prob_free(t.arg)
    if isinstance(t, Project):
        return t.depth == 0 or prob_free(t.arg)
    if isinstance(t, Resolved):
        return True
    return False  # recursion variables are treated conservatively


def may_terminate(t: Term) -> bool:
    """Syntactic over-approximation of silent termination (eps or a passing guard)."""
    if isinstance(t, (Epsilon, GuardAtom)):
        return True
    if isinstance(t, Breve):
        return isinstance(t.arg, Epsilon)
    if isinstance(t, (Atom, Delta, Tau, Comm)):
        return False
    if isinstance(t, Seq):
        return may_terminate(t.left) and may_terminate(t.right)
    if isinstance(t, (Alt, ProbAlt)):
        return may_terminate(t.left) or may_terminate(t.right)
    if isinstance(t, (Whole, Par, LeftMerge)):
        return may_terminate(t.left) and may_terminate(t.right)
    if isinstance(t, Unless):
        return may_terminate(t.left)
    if isinstance(t, (ConflictElim, Encap, Hide, Resolved)):
        return may_terminate(t.arg)
    if isinstance(t, Project):
        return t.depth > 0 and may_terminate(t.arg)
    return True


# ---------------------------------------------------------------------------
# algebra declarations and recursive specifications

def _pair(a: str, b: str) -> frozenset:
    return frozenset((a, b))


@dataclass(frozen=True)
class AlgebraDecl:
    events: frozenset = frozenset()
    comm: tuple = ()            # ((a, b), c) entries, symmetric closure implied
    causal_order: frozenset = frozenset()  # strict pairs (a, b) meaning a < b
    conflicts: frozenset = frozenset()
    prob_conflicts: frozenset = frozenset()
    races: frozenset = frozenset()
    _gamma: dict = field(default=None, compare=False, hash=False, repr=False)
    _lt: frozenset = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        gamma = {}
        for (a, b), c in self.comm:
            for k in ((a, b), (b, a)):
                if gamma.get(k, c) != c:
                    raise TermError(f"communication of {a} and {b} declared twice")
                gamma[k] = c
            if c in ("eps", TAU):
                raise TermError("communication may not produce eps or tau")
        object.__setattr__(self, "_gamma", gamma)
        # transitive closure of the declared order
        lt = set(self.causal_order)
        changed = True
        while changed:
            changed = False
            for (a, b) in list(lt):
                for (c, d) in list(lt):
                    if b == c and (a, d) not in lt:
                        lt.add((a, d))
                        changed = True
        if any(a == b for a, b in lt):
            raise TermError("causal order contains a cycle")
        object.__setattr__(self, "_lt", frozenset(lt))
        for rel in (self.conflicts, self.prob_conflicts, self.races):
            for p in rel:
                if len(p) != 2:
                    raise TermError("conflict and race pairs must relate two distinct events")

    @classmethod
    def build(cls, events=(), comm=None, order=(), conflicts=(), prob_conflicts=(), races=()):
        comm = comm or {}
        return cls(
            events=frozenset(events),
            comm=tuple(sorted(((tuple(k), v) for k, v in comm.items()))),
            causal_order=frozenset(tuple(p) for p in order),
            conflicts=frozenset(_pair(*p) for p in conflicts),
            prob_conflicts=frozenset(_pair(*p) for p in prob_conflicts),
            races=frozenset(_pair(*p) for p in races),
        )

    def gamma(self, a: str, b: str) -> str | None:
        return self._gamma.get((a, b))

    def lt(self, a: str, b: str) -> bool:
        return (a, b) in self._lt

    def leq(self, a: str, b: str) -> bool:
        """a <= b including concurrency: false only when b strictly precedes a."""
        return not self.lt(b, a)

    def conflict(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.conflicts

    def pconflict(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.prob_conflicts

    def race(self, a: str, b: str) -> bool:
        return _pair(a, b) in self.races

    def concurrent(self, a: str, b: str) -> bool:
        """Whether a and b may occur in one step."""
        if a == TAU or b == TAU:
            return True
        return not (self.lt(a, b) or self.lt(b, a) or self.conflict(a, b) or self.pconflict(a, b))

    def eliminated(self, e: str, others: Iterable[str]) -> bool:
        """Whether event e is turned into tau by the unless operator against `others`."""
        if e == TAU:
            return False
        for g in others:
            # an event never eliminates itself; otherwise U2 and U3 disagree on e << e
            if g == TAU or g == e:
                continue
            if self.conflict(e, g) or self.pconflict(e, g):
                return True
            for pair in self.conflicts | self.prob_conflicts:
                if g in pair and len(pair) == 2:
                    (h,) = pair - {g}
                    if self.lt(h, e):
                        return True
        return False

    def warnings(self) -> list[str]:
        out = []
        for (a, b), _ in self.comm:
            if a == b:
                out.append(f"communication of {a} with itself")
        return out

    def with_events(self, extra: Iterable[str]) -> "AlgebraDecl":
        return AlgebraDecl(
            events=self.events | frozenset(extra), comm=self.comm,
            causal_order=self.causal_order, conflicts=self.conflicts,
            prob_conflicts=self.prob_conflicts, races=self.races)


EMPTY_ALGEBRA = AlgebraDecl()


class UndefinedRecVar(TermError):
    def __init__(self, name):
        super().__init__(f"recursion variable {name} has no equation")
        self.name = name


@dataclass(frozen=True)
class RecSpec:
    equations: tuple = ()  # ((name, term), ...) in declaration order

    @classmethod
    def of(cls, mapping: Mapping[str, Term]) -> "RecSpec":
        spec = cls(tuple(mapping.items()))
        spec.validate()
        return spec

    def as_dict(self) -> dict[str, Term]:
        return dict(self.equations)

    def __contains__(self, name):
        return any(n == name for n, _ in self.equations)

    def body(self, name: str) -> Term:
        for n, t in self.equations:
            if n == name:
                return t
        raise UndefinedRecVar(name)

    def validate(self):
        names = {n for n, _ in self.equations}
        for _, t in self.equations:
            for v in free_recvars(t):
                if v not in names:
                    raise UndefinedRecVar(v)

    def guarded(self) -> bool:
        """Every variable occurrence is preceded by an event prefix on each path."""
        bodies = self.as_dict()

        def unguarded_vars(t: Term) -> set[str]:
            if isinstance(t, RecVar):
                return {t.name}
            if isinstance(t, Seq):
                left = unguarded_vars(t.left)
                if isinstance(t.left, (Atom, Tau)) or _has_event_head(t.left):
                    return left
                return left | unguarded_vars(t.right)
            out = set()
            for c in children(t):
                out |= unguarded_vars(c)
            return out

        graph = {n: unguarded_vars(t) for n, t in bodies.items()}
        state: dict[str, int] = {}

        def cyclic(n):
            state[n] = 1
            for m in graph.get(n, ()):
                if state.get(m) == 1 or (state.get(m) is None and cyclic(m)):
                    return True
            state[n] = 2
            return False

        return not any(state.get(n) is None and cyclic(n) for n in graph)

    def events(self) -> set[str]:
        out = set()
        for _, t in self.equations:
            out |= atoms_of(t)
        return out


def _has_event_head(t: Term) -> bool:
    """True if every way of starting t performs an event before terminating."""
    if isinstance(t, (Atom, Tau)):
        return True
    if isinstance(t, Seq):
        return _has_event_head(t.left) or _has_event_head(t.right)
    if isinstance(t, (Alt, ProbAlt)):
        return _has_event_head(t.left) and _has_event_head(t.right)
    if isinstance(t, (Par, Whole, LeftMerge, Comm)):
        return _has_event_head(t.left) or _has_event_head(t.right)
    return False


EMPTY_SPEC = RecSpec()


def event_closure(t: Term, spec: RecSpec = EMPTY_SPEC, _cache=None) -> frozenset:
    """Events t may perform, following recursion variables through their equations."""
    seen_vars: set[str] = set()
    out: set[str] = set()
    stack = [t]
    while stack:
        x = stack.pop()
        for y in _performing_subterms(x):
            if isinstance(y, Atom):
                out.add(y.name)
            elif isinstance(y, Tau):
                out.add(TAU)
            elif isinstance(y, RecVar) and y.name not in seen_vars:
                seen_vars.add(y.name)
                if y.name in spec:
                    stack.append(spec.body(y.name))
    return frozenset(out)


def _performing_subterms(t: Term) -> Iterator[Term]:
    """Subterms that may act; the right operand of unless only renames."""
    stack = [t]
    while stack:
        x = stack.pop()
        yield x
        if isinstance(x, Unless):
            stack.append(x.left)
        else:
            stack.extend(children(x))
