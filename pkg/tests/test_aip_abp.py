from fractions import Fraction

import pytest

from pptc.abp import buffer_traces, instantiate, run_abp
from pptc.aip import aip_equal
from pptc.parser import parse_spec_file, parse_term
from pptc.terms import RecVar, TermError


class TestAip:
    def test_unrolled_loop(self):
        sf = parse_spec_file("eq X = a . X; eq Y = a . a . Y; root X;")
        v = aip_equal(RecVar("X"), RecVar("Y"), sf.recspec, 5)
        assert v.equal and v.equal_up_to == 5

    def test_late_difference(self):
        sf = parse_spec_file("eq X = a . a . b . X; eq Y = a . a . c . Y; root X;")
        v = aip_equal(RecVar("X"), RecVar("Y"), sf.recspec, 5)
        assert v.first_difference == 3 and v.equal_up_to == 2
        assert "first difference at n=3" in v.report()

    def test_probabilistic_loop(self):
        sf = parse_spec_file("eq X = a . X +[1/2] b . X; eq Y = b . Y +[1/2] a . Y; root X;")
        assert aip_equal(RecVar("X"), RecVar("Y"), sf.recspec, 4).equal

    def test_closed_terms(self):
        assert aip_equal(parse_term("a . b"), parse_term("a . c"), n_max=3).first_difference == 2

    def test_bad_depth(self):
        with pytest.raises(ValueError):
            aip_equal(parse_term("a"), parse_term("a"), n_max=0)


class TestBufferOracle:
    def test_oracle_prefix_closed(self):
        traces = buffer_traces(5)
        assert () in traces
        assert all(tr[:-1] in traces for tr in traces if tr)


class TestAbp:
    @pytest.mark.parametrize("loss", [Fraction(1, 3), Fraction(1, 2)])
    def test_capacity_one(self, loss):
        rep = run_abp(loss, branching=False)
        assert rep.traces_equal and rep.buff_matches_oracle
        assert rep.observable_alphabet == ["acceptR", "acceptS", "deliverR", "deliverS"]

    def test_loss_does_not_change_structure(self):
        a, b = run_abp(Fraction(1, 3), branching=False), run_abp(Fraction(1, 2), branching=False)
        assert a.states_ab == b.states_ab

    def test_capacity_two(self):
        rep = run_abp(Fraction(1, 2), capacity=2, branching=False)
        assert rep.traces_equal

    def test_duplication(self):
        rep = run_abp(Fraction(1, 3), dup=Fraction(1, 3), branching=False)
        assert rep.traces_equal

    def test_visible_internals_differ(self):
        rep = run_abp(Fraction(1, 2), hide=False, branching=False)
        assert not rep.traces_equal and rep.only_in_ab

    def test_template_instantiation(self):
        text = instantiate(Fraction(1, 4))
        # the lost branch restarts the channel with the loss weight
        assert "(CD +[1/4] D0)" in text
        with pytest.raises(TermError):
            instantiate(Fraction(0))

    def test_report_serializes(self):
        d = run_abp(Fraction(1, 2), branching=False).to_dict()
        assert d["traces_equal"] and d["capacity"] == 1
