"""Exhaustive optimal cost for small closed-guard networks with constant rates.

With closed guards, integer constants and constant rates, some optimal run
moves at integer clock values only, and waiting longer than ``maxConst + 1``
buys nothing: every clock is then past every bound. The search enumerates
canonical runs whose delays are integers in ``[1, maxConst + 1]``; clock
values above ``maxConst + 1`` are capped, which keeps the state space finite
and lets results be memoised per ``(configuration, steps left, last step)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from . import model as m
from . import semantics as sem
from .errors import UnsupportedInstanceError

CLOSED = ("<=", ">=", "=")


@dataclass(frozen=True)
class OracleResult:
    cost: Optional[Fraction]
    run: Optional[sem.Run]

    @property
    def reachable(self) -> bool:
        return self.cost is not None


def max_constant(net: m.Network) -> int:
    consts = [0]
    for a in net.automata:
        consts += [g.bound for l in a.locations for g in l.invariant]
        consts += [g.bound for e in a.edges for g in e.guard]
    return max(consts)


def check_supported(net: m.Network, max_const: int) -> None:
    for a in net.automata:
        atoms = []
        for l in a.locations:
            if not isinstance(l.price, m.ConstantRate):
                raise UnsupportedInstanceError(f"{a.name}.{l.id}: only constant rates are supported")
            if l.price.rate < 0:
                raise UnsupportedInstanceError(f"{a.name}.{l.id}: negative rate")
            atoms += [(f"{a.name}.{l.id} invariant", g) for g in l.invariant]
        for j, e in enumerate(a.edges):
            if e.price < 0:
                raise UnsupportedInstanceError(f"{a.name} edge {j}: negative price")
            atoms += [(f"{a.name} edge {j} guard", g) for g in e.guard]
        for where, g in atoms:
            if g.op not in CLOSED:
                raise UnsupportedInstanceError(f"{where}: open constraint {g.clock} {g.op} {g.bound}")
            if g.bound > max_const:
                raise UnsupportedInstanceError(f"{where}: constant {g.bound} exceeds maxConst {max_const}")


def _hits(target, locs) -> bool:
    return all(t is None or t == l for t, l in zip(target, locs))


def opt_cost_exhaustive(net: m.Network, source, target, steps: int, max_const: Optional[int] = None) -> OracleResult:
    """Least cost of a run of at most ``steps`` steps from ``source`` to ``target``."""
    if max_const is None:
        max_const = max_constant(net)
    check_supported(net, max_const)
    cap = max_const + 1
    menu = [Fraction(d) for d in range(1, cap + 1)]
    source = tuple(source)
    target = tuple(target)
    start = sem.initial_configuration(net, source)
    names = net.clock_names()

    def key(c):
        return c.locs, tuple(min(c.nu[n], cap) for n in names)

    configs = {}

    @lru_cache(maxsize=None)
    def best(k, left, after_delay):
        c = configs[k]
        here = Fraction(0) if _hits(target, c.locs) else None
        found = (here, None)
        if left == 0:
            return found
        for s, nxt in sem.successors(net, c, () if after_delay else menu):
            if isinstance(s, sem.Null):
                continue
            nk = key(nxt)
            configs.setdefault(nk, sem.Configuration(nxt.locs, m.ClockValuation(dict(zip(names, nk[1]))), Fraction(0)))
            sub, _ = best(nk, left - 1, isinstance(s, sem.Delay))
            if sub is None:
                continue
            total = nxt.u - c.u + sub
            if found[0] is None or total < found[0]:
                found = (total, (s, nk, isinstance(s, sem.Delay)))
        return found

    k0 = key(start)
    configs[k0] = sem.Configuration(start.locs, m.ClockValuation(dict(zip(names, k0[1]))), Fraction(0))
    cost, _ = best(k0, steps, False)
    if cost is None:
        return OracleResult(None, None)
    # costs are non-negative, so a reached target always prefers to stop
    out, k, left, after = [], k0, steps, False
    while True:
        _, move = best(k, left, after)
        if move is None:
            break
        s, k, after = move
        out.append(s)
        left -= 1
    run = sem.Run(start, tuple(out))
    final, replayed = sem.replay(net, run)
    if replayed != cost or not _hits(target, final.locs):
        raise AssertionError(f"oracle run replays to {replayed}, expected {cost}")
    return OracleResult(cost, run)


# ---------------------------------------------------------------------------
# random instances


@dataclass
class InstanceStats:
    resets: int = 0
    handshakes: int = 0
    invariants: int = 0


def _guard(rng, clocks, max_const, p):
    atoms = []
    for c in clocks:
        if rng.random() < p:
            atoms.append(m.GuardAtom(c, rng.choice(CLOSED), rng.randint(0, max_const)))
    return tuple(atoms)


def _invariant(rng, clocks, max_const):
    if clocks and rng.random() < 0.25:
        return (m.GuardAtom(rng.choice(clocks), "<=", rng.randint(1, max_const)),)
    return ()


def _automaton(rng, name, n_locs, n_clocks, max_const, max_rate, sync_pool=()):
    clocks = tuple(f"x{i}" for i in range(n_clocks))
    locs = []
    for i in range(n_locs):
        inv = _invariant(rng, clocks, max_const) if i < n_locs - 1 else ()
        locs.append(m.Location(f"l{i}", inv, m.ConstantRate(rng.randint(0, max_rate))))
    edges = []

    def edge(src, tgt, sync=None):
        resets = tuple(c for c in clocks if rng.random() < 0.35)
        edges.append(m.Edge(f"l{src}", f"l{tgt}", _guard(rng, clocks, max_const, 0.5), resets, sync, rng.randint(0, 3)))

    for i in range(n_locs - 1):  # a spine keeps the last location plausibly reachable
        edge(i, i + 1, rng.choice(sync_pool) if sync_pool and rng.random() < 0.5 else None)
    for _ in range(rng.randint(0, n_locs)):
        edge(rng.randrange(n_locs), rng.randrange(n_locs), rng.choice(sync_pool) if sync_pool and rng.random() < 0.3 else None)
    return m.PricedAutomaton(name, tuple(locs), tuple(edges), clocks, "l0")


def random_instance(
    seed: int,
    max_locations: int = 4,
    max_clocks: int = 2,
    max_const: int = 3,
    max_rate: int = 4,
    max_steps: int = 6,
    two_automata: Optional[bool] = None,
) -> tuple:
    """Deterministic ``(network, query)`` for ``seed``: closed guards, constant rates."""
    rng = random.Random(seed)
    pair = rng.random() < 0.3 if two_automata is None else two_automata
    n_locs = rng.randint(2, max_locations)
    n_clocks = rng.randint(1, max_clocks)
    if not pair:
        a = _automaton(rng, "A", n_locs, n_clocks, max_const, max_rate)
        net = m.Network((a,))
        target = ("l%d" % (n_locs - 1),)
    else:
        a = _automaton(rng, "A", n_locs, n_clocks, max_const, max_rate, (("c", "!"),))
        b_locs = (m.Location("m0", (), m.ConstantRate(rng.randint(0, max_rate))), m.Location("m1", (), m.ConstantRate(rng.randint(0, max_rate))))
        b_edges = (
            m.Edge("m0", "m1", _guard(rng, ("y",), max_const, 0.5), ("y",), ("c", "?"), rng.randint(0, 3)),
            m.Edge("m1", "m0", _guard(rng, ("y",), max_const, 0.5), (), ("c", "?"), rng.randint(0, 3)),
            m.Edge("m1", "m1", (), ("y",), None, rng.randint(0, 3)),
        )
        b = m.PricedAutomaton("B", b_locs, b_edges, ("y",), "m0")
        net = m.Network((a, b), ("c",))
        target = ("l%d" % (n_locs - 1), None)
    steps = rng.randint(2, max_steps)
    q = m.Query((None,) * len(net.automata), target, steps, Fraction(0))
    return net, q


def instance_stats(net: m.Network) -> InstanceStats:
    s = InstanceStats()
    for a in net.automata:
        s.resets += sum(1 for e in a.edges if e.resets)
        s.handshakes += sum(1 for e in a.edges if e.sends)
        s.invariants += sum(1 for l in a.locations if l.invariant)
    return s
