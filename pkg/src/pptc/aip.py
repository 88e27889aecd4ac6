"""Equality by finite projections: compare depth-n projections for n = 1..n_max."""
from __future__ import annotations

from dataclasses import dataclass, field

from .config import DEFAULT_LIMITS, Limits
from .equivalence import PSTEP, check
from .rewriter import project_rewrite
from .semantics import build_plts
from .terms import EMPTY_ALGEBRA, EMPTY_SPEC, AlgebraDecl, RecSpec, Term


@dataclass
class AipVerdict:
    relation: str
    n_max: int
    per_depth: list = field(default_factory=list)   # (n, equal, left projection, right projection)

    @property
    def equal_up_to(self) -> int:
        """Largest n such that all depths 1..n agree."""
        k = 0
        for n, eq, _, _ in self.per_depth:
            if not eq:
                break
            k = n
        return k

    @property
    def equal(self) -> bool:
        return all(eq for _, eq, _, _ in self.per_depth)

    @property
    def first_difference(self) -> int | None:
        for n, eq, _, _ in self.per_depth:
            if not eq:
                return n
        return None

    def report(self) -> str:
        from .parser import pretty_print
        lines = [f"projection comparison under {self.relation}, n <= {self.n_max}"]
        for n, eq, l, r in self.per_depth:
            lines.append(f"  n={n}: {'equal' if eq else 'different'}")
            if not eq:
                lines.append(f"    left:  {pretty_print(l)}")
                lines.append(f"    right: {pretty_print(r)}")
        lines.append("equal at every depth" if self.equal else f"first difference at n={self.first_difference}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"relation": self.relation, "n_max": self.n_max, "equal": self.equal,
                "per_depth": [{"n": n, "equal": eq} for n, eq, _, _ in self.per_depth]}


def aip_equal(t1: Term, t2: Term, spec: RecSpec = EMPTY_SPEC, n_max: int = 5,
              relation: str = PSTEP, algebra: AlgebraDecl = EMPTY_ALGEBRA,
              spec2: RecSpec | None = None, limits: Limits = DEFAULT_LIMITS,
              stop_early: bool = False) -> AipVerdict:
    """Compare the projections of t1 and t2 at every depth up to n_max.

    Each projection is first rewritten to a projection-free basic term, so
    the comparison runs on small acyclic systems.  `spec2` defaults to `spec`
    and lets the two sides use separately named equations.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    spec2 = spec if spec2 is None else spec2
    out = AipVerdict(relation, n_max)
    for n in range(1, n_max + 1):
        p1 = project_rewrite(t1, n, algebra, spec, limits=limits)
        p2 = project_rewrite(t2, n, algebra, spec2, limits=limits)
        l1 = build_plts(p1, algebra, limits=limits)
        l2 = build_plts(p2, algebra, limits=limits)
        eq = check(l1, l2, relation).equivalent
        out.per_depth.append((n, eq, p1, p2))
        if stop_early and not eq:
            break
    return out
