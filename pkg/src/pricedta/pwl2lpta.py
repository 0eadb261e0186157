"""Compile a piecewise-linearly priced automaton into a linearly priced one.

Every location ``l`` with structure ``(P, Y_P, Y_I)`` of ``n`` breakpoints is
split into ``2n`` sub-locations: one per breakpoint ``l^p`` and one per open
interval ``l^(p_j,p_j+1)``. A fresh dwell clock, reset on every edge, measures
the time spent since entering ``l``. Each sub-location is a *guess* of where
the next dwell will land:

* the sub-location's rate is the piece's slope (0 for breakpoints),
* its outgoing edges check the guess with a constraint on the dwell clock
  (``x = p_i``, or ``p_j < x < p_j+1``),
* its outgoing edges add the piece's intercept ``c_j`` (or the breakpoint value
  ``y_i``) to the original edge price.

A dwell ``t`` followed by edge ``e`` therefore costs ``m_j*t + c_j + price(e)
= f(t) + price(e)`` on both sides. The offset is settled on the edge that
*leaves* the sub-location, so a run's last dwell must be closed by an edge for
the accounting to balance; :func:`lift_run` and :func:`project_run` reject
runs that end with an unsettled delay. Zero dwells are free (they are null
steps), so the breakpoint at 0 carries no offset.

The transform works on single-automaton networks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import model as m
from . import semantics as sem
from .errors import TransformError

INF = "inf"


@dataclass(frozen=True)
class TransformMap:
    """Relates the piecewise automaton to its linear image.

    ``alpha`` maps ``(location, ("point", i) | ("interval", j))`` to a new
    location id; ``beta`` maps ``(location, j)`` to ``(slope, intercept)``;
    ``theta`` maps each original location to its sub-locations; ``edges``
    lists, for every new edge, ``(original edge index, source sub, target sub)``.
    """

    alpha: dict
    beta: dict
    theta: dict
    owner: dict
    edges: tuple
    edge_index: dict
    dwell_clock: str

    @property
    def upsilon(self) -> frozenset:
        return frozenset((l, s) for l, subs in self.theta.items() for s in subs)

    def to_json(self) -> dict:
        from .parser import format_rational

        return {
            "dwellClock": self.dwell_clock,
            "theta": {l: list(subs) for l, subs in self.theta.items()},
            "alpha": [
                {"location": l, "kind": k, "index": i, "sublocation": s}
                for (l, (k, i)), s in self.alpha.items()
            ],
            "beta": [
                {"location": l, "interval": j, "slope": format_rational(mc[0]), "intercept": format_rational(mc[1])}
                for (l, j), mc in self.beta.items()
            ],
            "edges": [list(t) for t in self.edges],
        }


def _structure(loc: m.Location) -> m.PwlStructure:
    p = loc.price
    if isinstance(p, m.ConstantRate):
        return m.PwlStructure.linear(p.rate)
    if not isinstance(p, m.Piecewise):
        raise TransformError(f"location {loc.id!r} has a {type(p).__name__} price; only piecewise-linear prices transform")
    if not p.structure.integral:
        raise TransformError(f"location {loc.id!r} has a non-integral structure")
    return p.structure


def _fmt(q) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _fresh_clock(a: m.PricedAutomaton, globals_) -> str:
    taken = set(a.clocks) | set(globals_)
    name, k = "x", 0
    while name in taken:
        k += 1
        name = f"x{k}"
    return name


def dwell_guard(s: m.PwlStructure, kind: str, i: int, clock: str) -> tuple:
    if kind == "point":
        return (m.GuardAtom(clock, "=", int(s.points[i])),)
    atoms = [m.GuardAtom(clock, ">", int(s.points[i]))]
    hi = s.upper(i)
    if hi is not None:
        atoms.append(m.GuardAtom(clock, "<", int(hi)))
    return tuple(atoms)


def exit_offset(s: m.PwlStructure, kind: str, i: int) -> Fraction:
    if kind == "point":
        return Fraction(0) if i == 0 else s.values[i]
    return s.pieces[i][1]


def transform(net: m.Network) -> tuple:
    """Return ``(linear network, TransformMap)`` for a one-automaton network."""
    if len(net.automata) != 1:
        raise TransformError("transform expects a single-automaton network")
    a = net.automata[0]
    x = _fresh_clock(a, net.global_clocks)
    structs = {loc.id: _structure(loc) for loc in a.locations}

    alpha, beta, theta, owner, kinds = {}, {}, {}, {}, {}
    new_locs = []
    used = set()
    for loc in a.locations:
        s = structs[loc.id]
        subs = []
        for i in range(len(s)):
            hi = s.upper(i)
            for kind, name in (
                ("point", f"{loc.id}^{_fmt(s.points[i])}"),
                ("interval", f"{loc.id}^({_fmt(s.points[i])},{_fmt(hi) if hi is not None else INF})"),
            ):
                if name in used:
                    raise TransformError(f"sub-location name clash on {name!r}")
                used.add(name)
                alpha[(loc.id, (kind, i))] = name
                owner[name] = loc.id
                kinds[name] = (kind, i)
                subs.append(name)
                if kind == "point":
                    rate = 0
                else:
                    mj, cj = s.pieces[i]
                    beta[(loc.id, i)] = (mj, cj)
                    rate = int(mj)
                new_locs.append(m.Location(name, loc.invariant, m.ConstantRate(rate)))
        theta[loc.id] = tuple(subs)

    new_edges, origin, index = [], [], {}
    for k, e in enumerate(a.edges):
        s = structs[e.source]
        for src in theta[e.source]:
            kind, i = kinds[src]
            for tgt in theta[e.target]:
                index[(k, src, tgt)] = len(new_edges)
                origin.append((k, src, tgt))
                new_edges.append(m.Edge(
                    source=src,
                    target=tgt,
                    guard=tuple(e.guard) + dwell_guard(s, kind, i, x),
                    resets=tuple(e.resets) + (x,),
                    sync=e.sync,
                    price=e.price + int(exit_offset(s, kind, i)),
                ))
    init = alpha[(a.initial_location, ("point", 0))]
    b = m.PricedAutomaton(a.name, tuple(new_locs), tuple(new_edges), tuple(a.clocks) + (x,), init)
    tmap = TransformMap(alpha, beta, theta, owner, tuple(origin), index, x)
    return m.Network((b,), net.channels, net.global_clocks), tmap


def has_signed_prices(net: m.Network) -> bool:
    a = net.automata[0]
    return any(isinstance(l.price, m.ConstantRate) and l.price.rate < 0 for l in a.locations) or any(
        e.price < 0 for e in a.edges
    )


# ---------------------------------------------------------------------------
# run translation


def _segments(steps):
    """Split into (body, closing Switch or None) blocks."""
    out, body = [], []
    for s in steps:
        if isinstance(s, sem.Handshake):
            raise TransformError("handshakes cannot occur in a single-automaton run")
        if isinstance(s, sem.Switch):
            out.append((body, s))
            body = []
        else:
            body.append(s)
    out.append((body, None))
    return out


def _dwell(body) -> Fraction:
    return sum((s.t for s in body if isinstance(s, sem.Delay)), Fraction(0))


def _sub_for(tmap, structs, loc, dwell):
    return tmap.alpha[(loc, structs[loc].locate(dwell))]


def lift_run(net_a: m.Network, net_b: m.Network, tmap: TransformMap, run: sem.Run) -> sem.Run:
    """Translate an admissible run of the piecewise automaton into the linear one.

    Each dwell segment (the steps between two edges) may hold at most one delay
    and must be closed by an edge.
    """
    sem.trace(net_a, run)
    a = net_a.automata[0]
    structs = {loc.id: _structure(loc) for loc in a.locations}
    segs = _segments(run.steps)
    for body, close in segs:
        if sum(isinstance(s, sem.Delay) for s in body) > 1:
            raise TransformError("a dwell segment holds several delays; their prices do not add up under a single dwell clock")
        if close is None and _dwell(body) > 0:
            raise TransformError("run ends with a delay not closed by an edge")
    loc = run.start.locs[0]
    subs = []
    for body, close in segs:
        subs.append(_sub_for(tmap, structs, loc, _dwell(body)))
        if close is not None:
            loc = a.edges[close.edge].target
    steps = []
    for k, (body, close) in enumerate(segs):
        steps.extend(body)
        if close is not None:
            steps.append(sem.Switch(0, tmap.edge_index[(close.edge, subs[k], subs[k + 1])]))
    nu = dict(run.start.nu)
    nu[f"{a.name}.{tmap.dwell_clock}"] = Fraction(0)
    start = sem.Configuration((subs[0],), m.ClockValuation(nu), run.start.u)
    return sem.Run(start, tuple(steps))


def project_run(net_a: m.Network, net_b: m.Network, tmap: TransformMap, run: sem.Run) -> sem.Run:
    """Translate an admissible run of the linear image back to the original."""
    sem.trace(net_b, run)
    b = net_b.automata[0]
    xq = f"{b.name}.{tmap.dwell_clock}"
    if run.start.nu[xq] != 0:
        raise TransformError("the dwell clock must start at 0")
    steps = []
    for body, close in _segments(run.steps):
        if close is None:
            if _dwell(body) > 0:
                raise TransformError("run ends with a delay not closed by an edge")
            steps.extend(body)
            continue
        if sum(isinstance(s, sem.Delay) for s in body) > 1:
            steps.append(sem.Delay(_dwell(body)))
        else:
            steps.extend(body)
        steps.append(sem.Switch(0, tmap.edges[close.edge][0]))
    nu = {k: v for k, v in run.start.nu.items() if k != xq}
    start = sem.Configuration((tmap.owner[run.start.locs[0]],), m.ClockValuation(nu), run.start.u)
    return sem.Run(start, tuple(steps))


def related(tmap: TransformMap, qa: sem.Configuration, qb: sem.Configuration) -> bool:
    """Location pair in the bisimulation and equal values on the shared clocks."""
    if tmap.owner.get(qb.locs[0]) != qa.locs[0]:
        return False
    return all(qb.nu[k] == v for k, v in qa.nu.items())


def query_map(tmap: TransformMap, source: str, target: str) -> list:
    """All (sub-source, sub-target) pairs over which optima are compared."""
    for l in (source, target):
        if l not in tmap.theta:
            raise TransformError(f"unknown location {l!r}")
    return [(s, t) for s in tmap.theta[source] for t in tmap.theta[target]]
