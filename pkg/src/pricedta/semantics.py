"""Priced timed transition system of a network: configurations, steps, replay.

Delays are global (every automaton ages together and pays its own location's
delay price); discrete steps move one automaton along an internal edge, or two
automata along a matching ``c!`` / ``c?`` pair. Zero-length waits are
:class:`Null` steps and cost nothing.

Invariants are checked at both ends of a delay. Each guard atom ``x ~ c``
carves an interval out of the delay line, so endpoint satisfaction implies
satisfaction throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from . import model as m
from .errors import InadmissibleStepError, ModelError, NonCanonicalRunError, ParseError, PtaError
from .parser import format_rational, parse_rational


@dataclass(frozen=True)
class Configuration:
    locs: tuple
    nu: m.ClockValuation
    u: Fraction = Fraction(0)


@dataclass(frozen=True)
class Delay:
    t: Fraction

    def __post_init__(self):
        object.__setattr__(self, "t", m.as_rational(self.t))
        if self.t <= 0:
            raise ModelError("delay must be strictly positive; use Null for zero waits")


@dataclass(frozen=True)
class Switch:
    automaton: int
    edge: int


@dataclass(frozen=True)
class Handshake:
    sender: int
    sender_edge: int
    receiver: int
    receiver_edge: int


@dataclass(frozen=True)
class Null:
    pass


Step = Union[Delay, Switch, Handshake, Null]


@dataclass(frozen=True)
class Run:
    start: Configuration
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


def initial_configuration(net: m.Network, locs: Optional[Sequence] = None, nu=None, u=0) -> Configuration:
    if locs is None:
        locs = net.initial_locations()
    else:
        locs = tuple(l if l is not None else a.initial_location for l, a in zip(locs, net.automata))
    if nu is None:
        nu = m.ClockValuation.zero(net.clock_names())
    elif not isinstance(nu, m.ClockValuation):
        nu = m.ClockValuation(nu)
    return Configuration(tuple(locs), nu, Fraction(u))


def first_noncanonical(steps: Sequence) -> Optional[int]:
    """Index of the second of two consecutive delays, or None."""
    for i in range(1, len(steps)):
        if isinstance(steps[i], Delay) and isinstance(steps[i - 1], Delay):
            return i
    return None


def invariant_violations(net: m.Network, locs, nu) -> list:
    bad = []
    for i, (a, lid) in enumerate(zip(net.automata, locs)):
        if not m.guard_sat(nu, a.location(lid).invariant, net.scope(i)):
            bad.append(f"{a.name}.{lid}")
    return bad


def delay_step(net: m.Network, c: Configuration, t) -> Configuration:
    """Let ``t > 0`` time units elapse, paying every automaton's delay price."""
    t = m.as_rational(t)
    if t <= 0:
        raise InadmissibleStepError("delay must be strictly positive")
    bad = invariant_violations(net, c.locs, c.nu)
    after = c.nu.delay(t)
    bad += invariant_violations(net, c.locs, after)
    if bad:
        raise InadmissibleStepError(f"delay {t} violates the invariant of {', '.join(sorted(set(bad)))}")
    cost = Fraction(0)
    for i, (a, lid) in enumerate(zip(net.automata, c.locs)):
        cost += m.price_eval(a.location(lid).price, net.local_view(i, c.nu), t)
    return Configuration(c.locs, after, c.u + cost)


def _edge(net, i, j) -> m.Edge:
    try:
        return net.automata[i].edges[j]
    except IndexError:
        raise InadmissibleStepError(f"no edge {j} in automaton {i}") from None


def _check_edge(net, c, i, e):
    a = net.automata[i]
    if c.locs[i] != e.source:
        raise InadmissibleStepError(f"{a.name} is in {c.locs[i]}, edge leaves {e.source}")
    if not m.guard_sat(c.nu, e.guard, net.scope(i)):
        raise InadmissibleStepError(f"guard of {a.name} edge {e.source}->{e.target} fails")


def switch_step(net: m.Network, c: Configuration, s: Step) -> Configuration:
    """Apply a discrete step (internal edge, handshake, or null)."""
    if isinstance(s, Null):
        return c
    if isinstance(s, Switch):
        moves = [(s.automaton, _edge(net, s.automaton, s.edge))]
        if moves[0][1].sync is not None:
            raise InadmissibleStepError("edge synchronises on a channel; fire it through a handshake")
    elif isinstance(s, Handshake):
        se, re_ = _edge(net, s.sender, s.sender_edge), _edge(net, s.receiver, s.receiver_edge)
        if s.sender == s.receiver:
            raise InadmissibleStepError("an automaton cannot synchronise with itself")
        if not (se.sends and re_.receives and se.channel == re_.channel):
            raise InadmissibleStepError(f"channel mismatch: {se.sync} / {re_.sync}")
        moves = [(s.sender, se), (s.receiver, re_)]
    else:
        raise InadmissibleStepError(f"not a discrete step: {s!r}")
    bad = invariant_violations(net, c.locs, c.nu)
    if bad:
        raise InadmissibleStepError(f"source invariant of {', '.join(bad)} fails")
    locs = list(c.locs)
    resets = []
    price = Fraction(0)
    for i, e in moves:
        _check_edge(net, c, i, e)
        locs[i] = e.target
        resets.extend(net.qualify(i, r) for r in e.resets)
        price += e.price
    nu = c.nu.reset(resets)
    bad = invariant_violations(net, locs, nu)
    if bad:
        raise InadmissibleStepError(f"target invariant of {', '.join(bad)} fails after the switch")
    return Configuration(tuple(locs), nu, c.u + price)


def step(net: m.Network, c: Configuration, s: Step) -> Configuration:
    if isinstance(s, Delay):
        return delay_step(net, c, s.t)
    return switch_step(net, c, s)


def trace(net: m.Network, run: Run) -> list:
    """All configurations visited by ``run`` (start included)."""
    i = first_noncanonical(run.steps)
    if i is not None:
        raise NonCanonicalRunError(f"consecutive delay steps at index {i - 1} and {i}")
    bad = invariant_violations(net, run.start.locs, run.start.nu)
    if bad:
        raise InadmissibleStepError(f"start configuration violates the invariant of {', '.join(bad)}")
    out = [run.start]
    for k, s in enumerate(run.steps):
        try:
            out.append(step(net, out[-1], s))
        except InadmissibleStepError as e:
            raise InadmissibleStepError(str(e), index=k) from None
        except ModelError as e:
            raise InadmissibleStepError(str(e), index=k) from None
    return out


def replay(net: m.Network, run: Run) -> tuple:
    """Execute ``run``; returns ``(final configuration, cost)``."""
    confs = trace(net, run)
    return confs[-1], confs[-1].u - run.start.u


def successors(net: m.Network, c: Configuration, delay_menu: Iterable = ()) -> list:
    """Every admissible discrete step plus ``Delay(t)`` for each admissible ``t``."""
    cands = [Null()]
    for i, a in enumerate(net.automata):
        for j, e in enumerate(a.edges):
            if e.source != c.locs[i]:
                continue
            if e.sync is None:
                cands.append(Switch(i, j))
            elif e.sends:
                for k, b in enumerate(net.automata):
                    if k == i or c.locs[k] is None:
                        continue
                    for l, f in enumerate(b.edges):
                        if f.source == c.locs[k] and f.receives and f.channel == e.channel:
                            cands.append(Handshake(i, j, k, l))
    for t in delay_menu:
        cands.append(Delay(t))
    out = []
    for s in cands:
        try:
            out.append((s, step(net, c, s)))
        except (InadmissibleStepError, PtaError):
            continue
    return out


# ---------------------------------------------------------------------------
# run descriptors (JSON)


def step_to_json(net: m.Network, s: Step) -> dict:
    if isinstance(s, Delay):
        return {"kind": "delay", "t": format_rational(s.t)}
    if isinstance(s, Switch):
        return {"kind": "switch", "automaton": net.automata[s.automaton].name, "edge": s.edge}
    if isinstance(s, Handshake):
        return {
            "kind": "handshake",
            "sender": [net.automata[s.sender].name, s.sender_edge],
            "receiver": [net.automata[s.receiver].name, s.receiver_edge],
        }
    return {"kind": "null"}


def step_from_json(net: m.Network, v, path="$") -> Step:
    if not isinstance(v, dict) or "kind" not in v:
        raise ParseError("step must be an object with a 'kind'", path=path)
    kind = v["kind"]
    try:
        if kind == "delay":
            return Delay(parse_rational(v.get("t"), f"{path}.t"))
        if kind == "switch":
            return Switch(net.index(v["automaton"]), int(v["edge"]))
        if kind == "handshake":
            (sa, se), (ra, re_) = v["sender"], v["receiver"]
            return Handshake(net.index(sa), int(se), net.index(ra), int(re_))
        if kind == "null":
            return Null()
    except ParseError:
        raise
    except (ModelError, KeyError, TypeError, ValueError) as e:
        raise ParseError(f"bad {kind} step: {e}", path=path) from None
    raise ParseError(f"unknown step kind {kind!r}", path=path)


def configuration_to_json(net: m.Network, c: Configuration) -> dict:
    return {
        "locations": {a.name: l for a, l in zip(net.automata, c.locs)},
        "clocks": {k: format_rational(v) for k, v in c.nu.items()},
        "cost": format_rational(c.u),
    }


def run_to_json(net: m.Network, run: Run) -> dict:
    return {
        "start": configuration_to_json(net, run.start),
        "steps": [step_to_json(net, s) for s in run.steps],
    }


def run_from_json(net: m.Network, data) -> Run:
    """Read a run descriptor; omitted start fields default to the initial configuration."""
    if not isinstance(data, dict):
        raise ParseError("run descriptor must be an object", path="$")
    start = data.get("start") or {}
    locs = None
    if "locations" in start:
        sel = start["locations"]
        locs = tuple(sel.get(a.name) for a in net.automata)
    nu = m.ClockValuation.zero(net.clock_names())
    if "clocks" in start:
        vals = dict(nu)
        for k, v in start["clocks"].items():
            if k not in vals:
                raise ParseError(f"unknown clock {k!r}", path="$.start.clocks")
            vals[k] = parse_rational(v, f"$.start.clocks.{k}")
        nu = m.ClockValuation(vals)
    u = parse_rational(start.get("cost", 0), "$.start.cost")
    steps = [step_from_json(net, s, f"$.steps[{i}]") for i, s in enumerate(data.get("steps", []))]
    return Run(initial_configuration(net, locs, nu, u), tuple(steps))
