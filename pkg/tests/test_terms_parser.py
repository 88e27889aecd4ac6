import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pptc.parser import (DuplicateEquation, TermSyntaxError, UnknownEvent, format_spec_file,
                         parse_guard, parse_spec_file, parse_term, pretty_guard, pretty_print)
from pptc.random_terms import ALL_OPS, TermShape, random_guard, random_term
from pptc.terms import (
    AlgebraDecl, Alt, Atom, BadProbability, Comm, DELTA, Encap, Hide, Par, ProbAlt, RecVar, Seq,
    UndefinedRecVar, canonicalize, free_recvars, substitute, summands,
)

a, b, c = Atom("a"), Atom("b"), Atom("c")
SHAPE = TermShape(ops=ALL_OPS + ("hide",), tau=True, eps=True, guards=("phi", "psi"))


def seeded_terms(max_size=14):
    return st.builds(lambda seed, n: random_term(random.Random(seed), n, SHAPE),
                     st.integers(0, 10**9), st.integers(1, max_size))


class TestCanonicalize:
    def test_commutes(self):
        assert canonicalize(Alt(b, a)) == Alt(a, b)

    def test_atom_unchanged(self):
        assert canonicalize(a) == a

    def test_three_summands_all_orders(self):
        want = Alt(a, Alt(b, c))
        for x, y, z in itertools.permutations((a, b, c)):
            assert canonicalize(Alt(Alt(x, y), z)) == want
            assert canonicalize(Alt(x, Alt(y, z))) == want

    @given(seeded_terms())
    def test_idempotent(self, t):
        once = canonicalize(t)
        assert canonicalize(once) == once

    @given(seeded_terms())
    def test_only_rearranges_summands(self, t):
        assert sorted(map(repr, summands(canonicalize(t)))) == sorted(map(repr, map(canonicalize, summands(t))))


class TestSubstitution:
    def test_unfold(self):
        x = RecVar("X")
        assert substitute(x, {"X": Seq(a, x)}) == Seq(a, x)

    def test_closed_term_untouched(self):
        assert substitute(a, {"X": b}) == a

    def test_partial_binding(self):
        assert substitute(Alt(RecVar("X"), RecVar("Y")), {"X": a}) == Alt(a, RecVar("Y"))

    def test_free_recvars(self):
        assert free_recvars(Alt(Seq(a, RecVar("X")), RecVar("Y"))) == {"X", "Y"}
        assert free_recvars(DELTA) == set()
        assert free_recvars(Encap(frozenset("a"), RecVar("X"))) == {"X"}


class TestProbabilities:
    def test_degenerate_weights_collapse(self):
        assert ProbAlt(a, 0, b) == b
        assert ProbAlt(a, 1, b) == a

    def test_out_of_range(self):
        with pytest.raises(BadProbability):
            ProbAlt(a, Fraction(3, 2), b)
        with pytest.raises(BadProbability):
            parse_term("a +[2] b")

    def test_lowest_terms(self):
        assert ProbAlt(a, Fraction(2, 4), b).prob == Fraction(1, 2)


class TestParser:
    def test_precedence(self):
        assert parse_term("a . b + c") == canonicalize(Alt(Seq(a, b), c))

    def test_prob(self):
        assert parse_term("a +[1/3] b") == ProbAlt(a, Fraction(1, 3), b)

    def test_encap(self):
        assert parse_term("encap{c}(a || b)") == Encap(frozenset({"c"}), Par(a, b))

    def test_left_assoc(self):
        assert parse_term("a . b . c") == Seq(Seq(a, b), c)

    def test_syntax_error_position(self):
        with pytest.raises(TermSyntaxError) as err:
            parse_term("a + ")
        assert "column" in str(err.value)

    def test_unknown_event(self):
        with pytest.raises(UnknownEvent):
            parse_term("a", AlgebraDecl.build(["b"]))

    def test_spec_file(self):
        sf = parse_spec_file("events a;\neq X = a . X;\nroot X;")
        assert len(sf.recspec.equations) == 1

    def test_comm_declared(self):
        sf = parse_spec_file("comm a b = c;\nroot a | b;")
        assert sf.root == Comm(a, b)
        assert sf.algebra.gamma("a", "b") == "c"

    def test_duplicate_equation(self):
        with pytest.raises(DuplicateEquation):
            parse_spec_file("eq X = a; eq X = b;")

    def test_undefined_variable(self):
        with pytest.raises(UndefinedRecVar):
            parse_spec_file("root Y;")

    def test_auto_declared_events_warn(self):
        sf = parse_spec_file("events a;\nroot a . b;")
        assert any("b" in w for w in sf.warnings)

    def test_race_declaration(self):
        sf = parse_spec_file("race a % b;\nroot a || b;")
        assert sf.algebra.race("b", "a")


class TestPrinter:
    def test_examples(self):
        assert pretty_print(Alt(a, b)) == "a + b"
        assert pretty_print(ProbAlt(a, Fraction(1, 2), b)) == "a +[1/2] b"
        assert pretty_print(Hide(frozenset({"i"}), Seq(a, Atom("i")))) == "hide{i}(a . i)"

    @settings(max_examples=300)
    @given(seeded_terms())
    def test_round_trip(self, t):
        assert parse_term(pretty_print(t)) == canonicalize(t)

    @given(st.integers(0, 10**9), st.integers(1, 5))
    def test_guard_round_trip(self, seed, n):
        g = random_guard(random.Random(seed), ["phi", "psi"], n)
        assert parse_guard(pretty_guard(g)) == g

    def test_spec_file_round_trip(self):
        src = """
        events a, b, c, i;
        comm a b = c;
        order a <= b;
        conflict a # c;
        pconflict b #p c;
        race a % i;
        state s0, s1;
        test phi @ s0 = true;
        effect a @ s0 = {s1};
        effect a @ s1 = {s1};
        eq X = a . X + b;
        root hide{i}(X || i);
        hoare { phi } a { !phi };
        """
        sf = parse_spec_file(src)
        again = parse_spec_file(format_spec_file(sf))
        assert again.root == sf.root
        assert again.recspec == sf.recspec
        assert again.algebra == sf.algebra
        assert again.triples == sf.triples


@settings(max_examples=300)
@given(st.text(alphabet="ab.+|&()[]!{}<>#%0123456789/ ;", max_size=30))
def test_parser_never_crashes(src):
    try:
        parse_term(src)
    except (TermSyntaxError, BadProbability):
        pass
