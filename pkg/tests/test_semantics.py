from fractions import Fraction

import pytest

from pricedta import gens
from pricedta import model as m
from pricedta import semantics as sem
from pricedta.errors import InadmissibleStepError, NonCanonicalRunError

from helpers import rate2_network

half = Fraction(1, 2)


def dec_module():
    return gens.gen_two_counter(gens.parse_program("inc c 1\ndec c 2\nhalt\n")).network


def test_delay_pays_rate_times_duration():
    net = rate2_network()
    c = sem.delay_step(net, sem.initial_configuration(net), 3)
    assert c.nu["A.x"] == 3 and c.u == 6


def test_decrement_gadget_delay_prices():
    net = dec_module()
    a = net.automata[0]
    l0 = next(l.id for l in a.locations if l.id.startswith("L1_") and l.id.endswith("_l0"))
    names = net.clock_names()
    vals = {n: Fraction(0) for n in names}
    vals["M.w"] = half  # c = 1 is held in w after the first increment
    c = sem.initial_configuration(net, (l0,), vals)
    assert sem.delay_step(net, c, 1).u == 0
    assert sem.delay_step(net, c, half).u == Fraction(1, 16)


def test_switch_resets_and_pays():
    a = m.PricedAutomaton("A", (m.Location("p"), m.Location("q")), (m.Edge("p", "q", (m.GuardAtom("x", "=", 1),), ("x",), None, 3),), ("x",))
    net = m.single(a)
    c = sem.initial_configuration(net, nu={"A.x": 1})
    c = sem.switch_step(net, c, sem.Switch(0, 0))
    assert c.locs == ("q",) and c.nu["A.x"] == 0 and c.u == 3


def test_guard_z_positive_blocks_immediate_exit():
    net = dec_module()
    with pytest.raises(InadmissibleStepError, match="guard"):
        sem.switch_step(net, sem.initial_configuration(net), sem.Switch(0, next(
            j for j, e in enumerate(net.automata[0].edges) if e.source != e.target)))


def handshake_net():
    a = m.PricedAutomaton("A", (m.Location("a0"), m.Location("a1")), (m.Edge("a0", "a1", sync=("c", "!"), price=2),))
    b = m.PricedAutomaton("B", (m.Location("b0"), m.Location("b1")), (
        m.Edge("b0", "b1", sync=("c", "?"), price=5),
        m.Edge("b0", "b0", sync=("c", "?"), price=1),
    ))
    return m.Network((a, b), ("c",))


def test_handshake_moves_both_and_pays_both():
    net = handshake_net()
    c = sem.switch_step(net, sem.initial_configuration(net), sem.Handshake(0, 0, 1, 0))
    assert c.locs == ("a1", "b1") and c.u == 7


def test_handshake_direction_mismatch():
    net = handshake_net()
    with pytest.raises(InadmissibleStepError, match="channel"):
        sem.switch_step(net, sem.initial_configuration(net), sem.Handshake(1, 0, 0, 0))


def test_synchronised_edge_cannot_fire_alone():
    net = handshake_net()
    with pytest.raises(InadmissibleStepError):
        sem.switch_step(net, sem.initial_configuration(net), sem.Switch(0, 0))


def test_handshakes_enumerated_per_edge_pair():
    net = handshake_net()
    hs = [s for s, _ in sem.successors(net, sem.initial_configuration(net)) if isinstance(s, sem.Handshake)]
    assert sorted((h.sender_edge, h.receiver_edge) for h in hs) == [(0, 0), (0, 1)]


def test_replay_empty_and_rate2():
    net = rate2_network()
    start = sem.initial_configuration(net)
    assert sem.replay(net, sem.Run(start))[1] == 0
    final, cost = sem.replay(net, sem.Run(start, (sem.Delay(3), sem.Switch(0, 0))))
    assert cost == 7 and final.locs == ("l1",)


def test_non_canonical_runs_are_rejected():
    net = rate2_network()
    with pytest.raises(NonCanonicalRunError, match="consecutive delay steps"):
        sem.replay(net, sem.Run(sem.initial_configuration(net), (sem.Delay(1), sem.Delay(2))))


def test_failing_step_index_is_reported():
    net = rate2_network()
    with pytest.raises(InadmissibleStepError) as info:
        sem.replay(net, sem.Run(sem.initial_configuration(net), (sem.Delay(1), sem.Switch(0, 0))))
    assert info.value.index == 1


def test_invariant_checked_at_delay_end():
    a = m.PricedAutomaton("A", (m.Location("l", (m.GuardAtom("x", "<=", 2),)),), (), ("x",))
    net = m.single(a)
    with pytest.raises(InadmissibleStepError, match="invariant"):
        sem.delay_step(net, sem.initial_configuration(net), 3)


def test_only_null_without_edges_under_zero_invariant():
    a = m.PricedAutomaton("A", (m.Location("l", (m.GuardAtom("x", "<=", 0),)),), (), ("x",))
    net = m.single(a)
    got = sem.successors(net, sem.initial_configuration(net), [1])
    assert [s for s, _ in got] == [sem.Null()]


def test_guard_enabled_exactly_at_bound():
    net = rate2_network()
    c = sem.initial_configuration(net, nu={"A.x": 2})
    assert not any(isinstance(s, sem.Switch) for s, _ in sem.successors(net, c))
    a = m.PricedAutomaton("A", (m.Location("l0"), m.Location("l1")), (m.Edge("l0", "l1", (m.GuardAtom("x", ">=", 2),)),), ("x",))
    net2 = m.single(a)
    c2 = sem.initial_configuration(net2, nu={"A.x": 2})
    assert any(isinstance(s, sem.Switch) for s, _ in sem.successors(net2, c2))


def test_split_delay_costs_the_same_for_constant_rates():
    net = rate2_network()
    start = sem.initial_configuration(net)
    split = sem.Run(start, (sem.Delay(1), sem.Null(), sem.Delay(2)))
    whole = sem.Run(start, (sem.Delay(3),))
    assert sem.replay(net, split)[1] == sem.replay(net, whole)[1] == 6


def test_split_delay_costs_differ_for_polynomial_prices():
    a = m.PricedAutomaton("A", (m.Location("l", (), m.Polynomial(("mul", "t", "t"))),), (), ("x",))
    net = m.single(a)
    start = sem.initial_configuration(net)
    split = sem.replay(net, sem.Run(start, (sem.Delay(1), sem.Null(), sem.Delay(1))))[1]
    whole = sem.replay(net, sem.Run(start, (sem.Delay(2),)))[1]
    assert (split, whole) == (2, 4)


def test_run_json_round_trip():
    net = handshake_net()
    run = sem.Run(sem.initial_configuration(net), (sem.Delay(half), sem.Handshake(0, 0, 1, 1), sem.Null()))
    assert sem.run_from_json(net, sem.run_to_json(net, run)) == run
