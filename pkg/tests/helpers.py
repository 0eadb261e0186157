"""Shared builders for the test suite."""

import random
import shutil
from fractions import Fraction

import pytest

from pricedta import model as m
from pricedta import semantics as sem
from pricedta.errors import PtaError

HAVE_SOLVER = shutil.which("z3") is not None
needs_solver = pytest.mark.skipif(not HAVE_SOLVER, reason="no z3 executable on PATH")


def rate2_network(edge_price=1):
    """Wait in l0 at rate 2, leave once x >= 3."""
    a = m.PricedAutomaton(
        "A",
        (m.Location("l0", (), m.ConstantRate(2)), m.Location("l1")),
        (m.Edge("l0", "l1", (m.GuardAtom("x", ">=", 3),), price=edge_price),),
        ("x",),
        "l0",
    )
    return m.single(a)


def rate2_query(budget, steps=2, comparator="<="):
    return m.Query((None,), ("l1",), steps, budget, comparator)


def two_piece():
    """Points 0, 2; values 0, 5; pieces 2t and t + 3."""
    return m.PwlStructure.make([0, 2], [0, 5], [(2, 0), (1, 3)])


# ---------------------------------------------------------------------------
# random piecewise-linear automata


def random_structure(rng, max_pieces=3, max_const=5):
    n = rng.randint(1, max_pieces)
    points = [0] + sorted(rng.sample(range(1, max_const + 1), n - 1))
    values = [rng.randint(0, max_const) for _ in range(n)]
    pieces = []
    for j in range(n):
        lo = points[j]
        hi = points[j + 1] if j + 1 < n else None
        while True:
            mj = rng.randint(-max_const, max_const) if hi is not None else rng.randint(0, max_const)
            cj = rng.randint(-max_const, max_const)
            if mj * lo + cj >= 0 and (hi is None or mj * hi + cj >= 0):
                break
        pieces.append((mj, cj))
    return m.PwlStructure.make(points, values, pieces, integral=True)


def random_pwl_automaton(rng, max_locations=4, max_clocks=2, max_pieces=3, max_const=5):
    n_locs = rng.randint(1, max_locations)
    clocks = tuple(f"c{i}" for i in range(rng.randint(1, max_clocks)))
    ops = ("<", "<=", "=", ">=", ">")
    locs = []
    for i in range(n_locs):
        inv = ()
        if rng.random() < 0.2:
            inv = (m.GuardAtom(rng.choice(clocks), "<=", rng.randint(2, max_const)),)
        locs.append(m.Location(f"q{i}", inv, m.Piecewise(random_structure(rng, max_pieces, max_const))))
    edges = []
    for _ in range(rng.randint(n_locs, 2 * n_locs + 1)):
        guard = tuple(
            m.GuardAtom(c, rng.choice(ops), rng.randint(0, max_const)) for c in clocks if rng.random() < 0.3
        )
        resets = tuple(c for c in clocks if rng.random() < 0.4)
        edges.append(m.Edge(f"q{rng.randrange(n_locs)}", f"q{rng.randrange(n_locs)}", guard, resets, None, rng.randint(0, max_const)))
    return m.single(m.PricedAutomaton("P", tuple(locs), tuple(edges), clocks, "q0"))


DELAYS = [Fraction(k, 4) for k in range(1, 29)]


def random_walk(net, rng, start=None, segments=6, delays=DELAYS, null_rate=0.15):
    """A canonical run of one automaton: each segment is [Null] [Delay] Switch."""
    conf = start or sem.initial_configuration(net)
    begin = conf
    steps = []
    for _ in range(rng.randint(0, segments)):
        seg = []
        c = conf
        if rng.random() < null_rate:
            seg.append(sem.Null())
        if rng.random() < 0.85:
            for t in rng.sample(delays, len(delays)):
                try:
                    c2 = sem.step(net, c, sem.Delay(t))
                except PtaError:
                    continue
                if _enabled(net, c2):
                    seg.append(sem.Delay(t))
                    c = c2
                    break
        moves = _enabled(net, c)
        if not moves:
            break
        s, c = rng.choice(moves)
        seg.append(s)
        steps.extend(seg)
        conf = c
    return sem.Run(begin, tuple(steps))


def _enabled(net, c):
    return [(s, n) for s, n in sem.successors(net, c) if isinstance(s, sem.Switch)]
