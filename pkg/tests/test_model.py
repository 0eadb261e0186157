from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pricedta import model as m
from pricedta.errors import ModelError, NegativePriceError, RangeError

from helpers import rate2_network, two_piece

half = Fraction(1, 2)


def nu(**kw):
    return m.ClockValuation({k: Fraction(v) for k, v in kw.items()})


def test_empty_guard_is_true():
    assert m.guard_sat(nu(x=0), ())


def test_upper_bound_guard_fails_above():
    assert not m.guard_sat(nu(x=Fraction(3, 2)), (m.GuardAtom("x", "<=", 1),))


def test_one_failing_conjunct_fails_guard():
    g = (m.GuardAtom("x", ">=", 2), m.GuardAtom("y", "<", 1))
    assert not m.guard_sat(nu(x=2, y=1), g)


def test_unknown_clock_in_guard_is_an_error():
    with pytest.raises(ModelError):
        m.guard_sat(nu(x=0), (m.GuardAtom("y", "<", 1),))


def test_valuation_rejects_negative_and_float():
    with pytest.raises(ModelError):
        nu(x=-1)
    with pytest.raises(ModelError):
        m.ClockValuation({"x": 0.5})


def test_valuation_delay_and_reset():
    v = nu(x=1, y=2).delay(half)
    assert v == nu(x=Fraction(3, 2), y=Fraction(5, 2))
    assert v.reset(["y"]) == nu(x=Fraction(3, 2), y=0)


def test_constant_rate_price():
    assert m.price_eval(m.ConstantRate(2), {}, 3) == 6


@pytest.mark.parametrize("t,expected", [(1, 2), (2, 5), (3, 6), (0, 0), (Fraction(5, 2), Fraction(11, 2))])
def test_piecewise_price_uses_point_values_at_breakpoints(t, expected):
    assert m.price_eval(m.Piecewise(two_piece()), {}, t) == expected


def test_decrement_price_vanishes_for_the_right_dwell():
    p = m.Polynomial(("pow", ("sub", 1, "x", ("div", "t", 2)), 2))
    assert m.price_eval(p, {"x": half}, 1) == 0
    assert m.price_eval(p, {"x": half}, half) == Fraction(1, 16)


def test_negative_polynomial_value_is_rejected():
    with pytest.raises(NegativePriceError):
        m.price_eval(m.Polynomial(("sub", "t", 1)), {}, half)


def test_lipschitz_out_of_range():
    p = m.Lipschitz(("mul", "t", "t"), 4, 2)
    assert m.price_eval(p, {}, 2) == 4
    with pytest.raises(RangeError):
        m.price_eval(p, {}, 3)


def test_valid_lpta_has_no_diagnostics():
    assert m.validate(rate2_network()) == []


def test_repeated_breakpoint_is_reported():
    s = m.PwlStructure.make([0, 2, 2], [0, 0, 0], [(0, 0), (0, 0), (0, 0)])
    a = m.PricedAutomaton("A", (m.Location("l", (), m.Piecewise(s)),))
    msgs = [d.message for d in m.validate(m.single(a))]
    assert "breakpoints not strictly increasing" in msgs


def test_undeclared_channel_is_reported():
    a = m.PricedAutomaton("A", (m.Location("l"),), (m.Edge("l", "l", sync=("go", "!")),))
    diags = m.validate(m.single(a))
    assert any("unknown channel" in d.message for d in diags)
    assert diags[0].path == "automata[0].edges[0].sync"


def test_negative_polynomial_found_by_sampling():
    a = m.PricedAutomaton("A", (m.Location("l", (), m.Polynomial(("sub", 1, ("mul", 2, "t")))),), (), (), "l")
    assert any("negative" in d.message for d in m.validate(m.single(a)))


def test_negative_piece_is_reported():
    s = m.PwlStructure.make([0, 2], [0, 0], [(-1, 1), (0, 0)])
    assert any("piece 0" in msg for msg in s.issues())


def test_query_checks():
    with pytest.raises(ModelError):
        m.Query((None,), ("l1",), -1)
    with pytest.raises(ModelError):
        m.Query((None,), ("l1",), 1, comparator="~")
    net = rate2_network()
    assert m.validate(net, [m.Query(("nowhere",), ("l1",), 1)])


def test_global_clock_scoping():
    a = m.PricedAutomaton("A", (m.Location("l"),), (), ("x",))
    net = m.Network((a,), (), ("g",))
    assert net.clock_names() == ["A.x", "g"]
    assert net.scope(0) == {"x": "A.x", "g": "g"}


@given(
    st.fractions(min_value=0, max_value=10),
    st.fractions(min_value=0, max_value=5),
    st.fractions(min_value=0, max_value=1),
    st.integers(min_value=0, max_value=10),
    st.sampled_from(["<", "<="]),
)
def test_upper_guards_stay_true_when_waiting_less(v, t, frac, bound, op):
    g = (m.GuardAtom("x", op, bound),)
    if m.guard_sat(nu(x=v + t), g):
        assert m.guard_sat(nu(x=v + t * frac), g)


@given(
    st.fractions(min_value=0, max_value=10),
    st.fractions(min_value=0, max_value=5),
    st.fractions(min_value=0, max_value=1),
    st.integers(min_value=0, max_value=10),
    st.sampled_from([">", ">="]),
)
def test_lower_guards_stay_true_when_waiting_more(v, t, frac, bound, op):
    g = (m.GuardAtom("x", op, bound),)
    if m.guard_sat(nu(x=v + t * frac), g):
        assert m.guard_sat(nu(x=v + t), g)


@given(st.integers(min_value=0, max_value=1))
def test_piecewise_value_at_each_breakpoint_is_exact(i):
    s = two_piece()
    got = m.price_eval(m.Piecewise(s), {}, s.points[i])
    assert got == s.values[i] and isinstance(got, Fraction)
