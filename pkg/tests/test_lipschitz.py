import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pricedta import lipschitz as lp
from pricedta import model as m
from pricedta import semantics as sem
from pricedta import solve
from pricedta.errors import ModelError

from helpers import needs_solver

square = m.Lipschitz(("mul", "t", "t"), 4, 2)


def test_square_on_unit_grid():
    lo, hi = lp.sandwich(square, lp.ApproxConfig(1, 4, 2, 1, 1))
    assert lo.points == (0, 1, 2) and lo.values == (0, 1, 4)
    assert lo(Fraction(1, 2)) == 0
    assert hi(Fraction(1, 2)) == Fraction(5, 2)
    assert lo(Fraction(1, 2)) <= Fraction(1, 4) <= hi(Fraction(1, 2))


def test_constant_price_bounds():
    p = m.Lipschitz(3, 2, 4)
    lo, hi = lp.sandwich(p, lp.ApproxConfig(1, 2, 4, 1, 1))
    assert lo(Fraction(1, 2)) == 2 and hi(Fraction(1, 2)) == 4
    assert all(lo(t) == hi(t) == 3 for t in range(5))


def test_choose_delta():
    assert lp.choose_delta(1, 2, 5) == Fraction(1, 10)
    assert lp.choose_delta(10, 2, 5) == 1
    assert lp.choose_delta(1, 2, 10) == lp.choose_delta(1, 2, 5) / 2
    with pytest.raises(ModelError):
        lp.choose_delta(0, 1, 1)


def test_config_rejects_delta_beyond_T():
    with pytest.raises(ModelError):
        lp.ApproxConfig(1, 1, 1, 1, 2)


def net_with(price, extra=()):
    a = m.PricedAutomaton(
        "A",
        (m.Location("l", (), price), m.Location("g")) + tuple(extra),
        (m.Edge("l", "g", (m.GuardAtom("x", "=", 1),)),),
        ("x",),
        "l",
    )
    return m.single(a)


def test_constant_rate_locations_are_untouched():
    net = net_with(m.ConstantRate(2))
    lo, hi = lp.build_bounding_automata(net, lp.ApproxConfig(1, 1, 1, 1, 1))
    assert lo == net and hi == net


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_bounding_automata_order_run_costs(seed):
    rng = random.Random(seed)
    net = net_with(square)
    cfg = lp.ApproxConfig(1, 4, 2, 1, Fraction(1, rng.randint(1, 8)))
    lo, hi = lp.build_bounding_automata(net, cfg)
    for _ in range(10):
        t = Fraction(rng.randint(1, 40), 20)
        run = sem.Run(sem.initial_configuration(net), (sem.Delay(t),))
        costs = [sem.replay(n, run)[1] for n in (lo, net, hi)]
        assert costs[0] <= costs[1] <= costs[2]
        assert costs[2] - costs[0] <= 4 * cfg.delta


def test_mixed_clock_bounds_are_refused():
    a = m.PricedAutomaton("A", (m.Location("p", (), square), m.Location("q", (), m.Lipschitz("t", 1, 3))))
    with pytest.raises(ModelError):
        lp.lipschitz_bound(m.single(a))


class Fixed:
    def __init__(self, lower, upper, infeasible=False):
        self.lower, self.upper, self.infeasible = lower, upper, infeasible


def test_eps_decide_verdicts_from_given_bounds():
    net = net_with(square)
    cfg = lp.ApproxConfig(Fraction(1, 10), 4, 2, 1, Fraction(1, 10))
    engine = lambda n, s, t, k: Fixed(Fraction(9, 10), Fraction(11, 10))
    assert lp.eps_decide(net, (None,), ("g",), 2, 100, cfg, engine).verdict is lp.Verdict.YES
    assert lp.eps_decide(net, (None,), ("g",), 2, Fraction(1, 2), cfg, engine).verdict is lp.Verdict.NO
    assert lp.eps_decide(net, (None,), ("g",), 2, Fraction(19, 20), cfg, engine).verdict is lp.Verdict.BOUNDARY
    none = lambda n, s, t, k: Fixed(None, None, infeasible=True)
    assert lp.eps_decide(net, (None,), ("g",), 2, 100, cfg, none).verdict is lp.Verdict.NO


@needs_solver
def test_eps_decide_brackets_a_forced_dwell():
    # the only way out waits exactly one time unit, so the optimum is f(1) = 1
    net = net_with(square)
    cfg = lp.ApproxConfig.for_epsilon(Fraction(1, 2), 4, 2, 1)
    engine = lambda n, s, t, k: solve.minimize(n, s, t, k, gamma=Fraction(1, 100))
    d = lp.eps_decide(net, (None,), ("g",), 2, 1, cfg, engine)
    assert d.lower <= 1 <= d.upper
    assert d.upper - d.lower <= cfg.D * cfg.K * cfg.delta
    assert d.verdict is lp.Verdict.YES
    assert lp.eps_decide(net, (None,), ("g",), 2, Fraction(1, 4), cfg, engine).verdict is not lp.Verdict.YES


def test_grid_stops_at_T_when_delta_does_not_divide_it():
    lo, hi = lp.sandwich(square, lp.ApproxConfig(1, 4, 2, 1, Fraction(3, 4)))
    assert lo.points == (0, Fraction(3, 4), Fraction(3, 2), 2)
    # the short last interval has a proportionally tighter gap
    assert hi(Fraction(7, 4)) - lo(Fraction(7, 4)) == 4 * Fraction(1, 2)
