"""Immutable model types: guards, price functions, automata, networks, queries.

All numeric data is exact (``int`` / ``Fraction``). Clock names inside an
automaton (guards, resets, price expressions) are *local*: they resolve to the
automaton's own clock if it declares one with that name, otherwise to a
network-wide global clock. :meth:`Network.clock_names` lists the qualified
names (``"A.x"`` for locals, bare names for globals) that key a
:class:`ClockValuation`.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence, Union

from . import expr as ex
from .errors import ModelError, NegativePriceError, RangeError

OPS = ("<", "<=", "=", ">=", ">")
COMPARATORS = ("<", "<=", "=", ">=", ">", "!=")

# Grid used to check non-negativity of polynomial prices.
NONNEG_SAMPLES = 1000


def as_rational(v) -> Fraction:
    if isinstance(v, float):
        raise ModelError(f"floating-point value {v!r} where an exact rational is required")
    return Fraction(v)


class ClockValuation(Mapping):
    """Immutable map from clock name to a non-negative rational."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, object] = ()):
        vals = {k: as_rational(v) for k, v in dict(values).items()}
        for k, v in vals.items():
            if v < 0:
                raise ModelError(f"clock {k} has negative value {v}")
        self._values = vals

    @classmethod
    def zero(cls, names) -> "ClockValuation":
        return cls({n: Fraction(0) for n in names})

    def __getitem__(self, k):
        return self._values[k]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __hash__(self):
        return hash(frozenset(self._values.items()))

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return dict(self._values) == dict(other)
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self._values.items()))
        return f"ClockValuation({inner})"

    def delay(self, t) -> "ClockValuation":
        t = Fraction(t)
        return ClockValuation({k: v + t for k, v in self._values.items()})

    def reset(self, names) -> "ClockValuation":
        vals = dict(self._values)
        for n in names:
            if n not in vals:
                raise ModelError(f"cannot reset unknown clock {n!r}")
            vals[n] = Fraction(0)
        return ClockValuation(vals)


@dataclass(frozen=True)
class GuardAtom:
    clock: str
    op: str
    bound: int

    def holds(self, value) -> bool:
        b = self.bound
        if self.op == "<":
            return value < b
        if self.op == "<=":
            return value <= b
        if self.op == "=":
            return value == b
        if self.op == ">=":
            return value >= b
        if self.op == ">":
            return value > b
        raise ModelError(f"unknown guard operator {self.op!r}")


Guard = tuple  # tuple[GuardAtom, ...]; empty means true


def guard_sat(nu: Mapping, g: Sequence[GuardAtom], resolve: Optional[Mapping[str, str]] = None) -> bool:
    """True iff every atom of ``g`` holds under ``nu`` (exact comparison).

    ``resolve`` maps the guard's clock names to keys of ``nu``.
    """
    for atom in g:
        name = resolve.get(atom.clock, atom.clock) if resolve else atom.clock
        if name not in nu:
            raise ModelError(f"guard mentions unknown clock {atom.clock!r}")
        if not atom.holds(nu[name]):
            return False
    return True


# ---------------------------------------------------------------------------
# price functions


@dataclass(frozen=True)
class PwlStructure:
    """Breakpoints, breakpoint values and per-interval (slope, intercept) pairs.

    Interval ``j`` is the open interval ``(points[j], points[j+1])``; the last
    one is unbounded. At a breakpoint the value comes from ``values``, so the
    function may be discontinuous there.
    """

    points: tuple
    values: tuple
    pieces: tuple
    integral: bool = False

    @classmethod
    def make(cls, points, values, pieces, integral=None) -> "PwlStructure":
        pts = tuple(as_rational(p) for p in points)
        vals = tuple(as_rational(v) for v in values)
        pcs = tuple((as_rational(m), as_rational(c)) for m, c in pieces)
        if integral is None:
            flat = pts + vals + tuple(itertools.chain.from_iterable(pcs))
            integral = all(q.denominator == 1 for q in flat)
        return cls(pts, vals, pcs, bool(integral))

    @classmethod
    def linear(cls, rate) -> "PwlStructure":
        """Single piece ``rate * t``: a constant-rate price in piecewise form."""
        return cls.make([0], [0], [(rate, 0)])

    def __len__(self):
        return len(self.points)

    def locate(self, t) -> tuple:
        """``("point", i)`` if ``t`` is breakpoint ``i``, else ``("interval", j)``."""
        i = bisect.bisect_left(self.points, t)
        if i < len(self.points) and self.points[i] == t:
            return ("point", i)
        return ("interval", max(i - 1, 0))

    def __call__(self, t) -> Fraction:
        kind, i = self.locate(t)
        if kind == "point":
            return self.values[i]
        m, c = self.pieces[i]
        return m * t + c

    def upper(self, j):
        """Right end of interval ``j`` (``None`` for the unbounded one)."""
        return self.points[j + 1] if j + 1 < len(self.points) else None

    def issues(self) -> list:
        out = []
        n = len(self.points)
        if n < 1:
            out.append("structure needs at least one breakpoint")
            return out
        if len(self.values) != n or len(self.pieces) != n:
            out.append("points, values and pieces must have equal length")
            return out
        if self.points[0] != 0:
            out.append("first breakpoint must be 0")
        if any(a >= b for a, b in zip(self.points, self.points[1:])):
            out.append("breakpoints not strictly increasing")
        if any(v < 0 for v in self.values):
            out.append("negative breakpoint value")
        flat = self.points + self.values + tuple(itertools.chain.from_iterable(self.pieces))
        if self.integral and any(q.denominator != 1 for q in flat):
            out.append("structure flagged integral has non-integer parameters")
        for j, (m, c) in enumerate(self.pieces):
            lo, hi = self.points[j], self.upper(j)
            if m * lo + c < 0 or (hi is not None and m * hi + c < 0) or (hi is None and m < 0):
                out.append(f"piece {j} is negative on its interval")
        return out


@dataclass(frozen=True)
class ConstantRate:
    rate: int

    def __post_init__(self):
        if not isinstance(self.rate, int) or isinstance(self.rate, bool):
            raise ModelError(f"constant rate must be an integer, got {self.rate!r}")


@dataclass(frozen=True)
class Piecewise:
    structure: PwlStructure


@dataclass(frozen=True)
class Polynomial:
    expr: ex.Expr

    def __post_init__(self):
        ex.check(self.expr)


@dataclass(frozen=True)
class Lipschitz:
    expr: ex.Expr
    K: Fraction
    T: Fraction

    def __post_init__(self):
        ex.check(self.expr)
        object.__setattr__(self, "K", as_rational(self.K))
        object.__setattr__(self, "T", as_rational(self.T))


PriceFunction = Union[ConstantRate, Piecewise, Polynomial, Lipschitz]


def price_eval(p: PriceFunction, clocks: Mapping[str, object], t) -> Fraction:
    """Price of dwelling ``t`` time units under ``p``.

    ``clocks`` holds the values at the start of the dwell, keyed by the names
    the price expression uses.
    """
    t = as_rational(t)
    if t < 0:
        raise ModelError(f"negative dwell time {t}")
    if isinstance(p, ConstantRate):
        val = p.rate * t
    elif isinstance(p, Piecewise):
        val = p.structure(t)
    elif isinstance(p, (Polynomial, Lipschitz)):
        env = dict(clocks)
        env[ex.DWELL] = t
        if isinstance(p, Lipschitz):
            if t > p.T:
                raise RangeError(f"dwell {t} exceeds the declared bound T={p.T}")
            for name in ex.free_vars(p.expr):
                if name in env and env[name] > p.T:
                    raise RangeError(f"{name}={env[name]} exceeds the declared bound T={p.T}")
        val = ex.evaluate(p.expr, env)
    else:
        raise ModelError(f"unknown price kind {type(p).__name__}")
    # a constant rate's sign is checked by validate(); signed rates are legal in transformed models
    if val < 0 and not isinstance(p, ConstantRate):
        raise NegativePriceError(f"price evaluated to {val} < 0")
    return val


# ---------------------------------------------------------------------------
# automata


@dataclass(frozen=True)
class Location:
    id: str
    invariant: tuple = ()
    price: PriceFunction = ConstantRate(0)


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: tuple = ()
    resets: tuple = ()
    sync: Optional[tuple] = None  # (channel, "!" | "?")
    price: int = 0

    @property
    def channel(self):
        return self.sync[0] if self.sync else None

    @property
    def sends(self) -> bool:
        return bool(self.sync) and self.sync[1] == "!"

    @property
    def receives(self) -> bool:
        return bool(self.sync) and self.sync[1] == "?"


@dataclass(frozen=True)
class PricedAutomaton:
    name: str
    locations: tuple
    edges: tuple = ()
    clocks: tuple = ()
    initial: Optional[str] = None

    def location(self, lid: str) -> Location:
        for loc in self.locations:
            if loc.id == lid:
                return loc
        raise ModelError(f"automaton {self.name!r} has no location {lid!r}")

    def location_ids(self) -> list:
        return [loc.id for loc in self.locations]

    @property
    def initial_location(self) -> str:
        return self.initial if self.initial is not None else self.locations[0].id


@dataclass(frozen=True)
class Network:
    automata: tuple
    channels: tuple = ()
    global_clocks: tuple = ()

    def index(self, name: str) -> int:
        for i, a in enumerate(self.automata):
            if a.name == name:
                return i
        raise ModelError(f"no automaton named {name!r}")

    def qualify(self, i: int, clock: str) -> str:
        a = self.automata[i]
        if clock in a.clocks:
            return f"{a.name}.{clock}"
        if clock in self.global_clocks:
            return clock
        raise ModelError(f"automaton {a.name!r} uses unknown clock {clock!r}")

    def scope(self, i: int) -> dict:
        """Local clock name -> qualified name, for automaton ``i``."""
        a = self.automata[i]
        out = {g: g for g in self.global_clocks}
        out.update({c: f"{a.name}.{c}" for c in a.clocks})
        return out

    def clock_names(self) -> list:
        names = []
        for a in self.automata:
            names.extend(f"{a.name}.{c}" for c in a.clocks)
        names.extend(self.global_clocks)
        return names

    def initial_locations(self) -> tuple:
        return tuple(a.initial_location for a in self.automata)

    def local_view(self, i: int, nu: Mapping) -> dict:
        return {local: nu[q] for local, q in self.scope(i).items()}


def single(automaton: PricedAutomaton, channels=(), global_clocks=()) -> Network:
    return Network((automaton,), tuple(channels), tuple(global_clocks))


@dataclass(frozen=True)
class Query:
    """Step-bounded reachability between location selections.

    ``source`` holds one location per automaton (``None`` = the automaton's
    initial location); ``target`` entries may be ``None`` meaning "any".
    """

    source: tuple
    target: tuple
    steps: int
    budget: Fraction = Fraction(0)
    comparator: str = "<="

    def __post_init__(self):
        object.__setattr__(self, "budget", as_rational(self.budget))
        if self.steps < 0:
            raise ModelError("step bound must be non-negative")
        if self.comparator not in COMPARATORS:
            raise ModelError(f"unknown comparator {self.comparator!r}")

    def resolved_source(self, net: Network) -> tuple:
        return tuple(s if s is not None else a.initial_location for s, a in zip(self.source, net.automata))


def compare(value, comparator: str, bound) -> bool:
    if comparator == "<":
        return value < bound
    if comparator == "<=":
        return value <= bound
    if comparator == "=":
        return value == bound
    if comparator == ">=":
        return value >= bound
    if comparator == ">":
        return value > bound
    if comparator == "!=":
        return value != bound
    raise ModelError(f"unknown comparator {comparator!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def _grid(dims: int, hi: Fraction) -> Iterator[tuple]:
    per = max(2, int(math.floor(NONNEG_SAMPLES ** (1.0 / dims)))) if dims else 1
    axis = [float(hi) * k / (per - 1) for k in range(per)] if dims else []
    return itertools.product(axis, repeat=dims)


def sampled_minimum(e: ex.Expr, hi) -> float:
    """Smallest value of ``e`` over a uniform grid on ``[0, hi]^vars``."""
    names = sorted(ex.free_vars(e))
    best = math.inf
    for point in _grid(len(names), Fraction(hi)):
        best = min(best, float(ex.evaluate(e, dict(zip(names, point)))))
    return best


def _max_constant(net: Network) -> int:
    consts = [0]
    for a in net.automata:
        for loc in a.locations:
            consts.extend(g.bound for g in loc.invariant)
        for e in a.edges:
            consts.extend(g.bound for g in e.guard)
    return max(consts)


def _check_guard(g, scope, path, out):
    for k, atom in enumerate(g):
        if atom.op not in OPS:
            out.append(Diagnostic(f"{path}[{k}]", f"unknown operator {atom.op!r}"))
        if not isinstance(atom.bound, int) or atom.bound < 0:
            out.append(Diagnostic(f"{path}[{k}]", "guard bound must be a non-negative integer"))
        if atom.clock not in scope:
            out.append(Diagnostic(f"{path}[{k}]", f"unknown clock {atom.clock!r}"))


def _check_price(p, scope, path, sample_hi, signed, out):
    if isinstance(p, ConstantRate):
        if p.rate < 0 and not signed:
            out.append(Diagnostic(path, "negative rate"))
    elif isinstance(p, Piecewise):
        for msg in p.structure.issues():
            out.append(Diagnostic(path, msg))
    elif isinstance(p, (Polynomial, Lipschitz)):
        unknown = ex.free_vars(p.expr) - set(scope) - {ex.DWELL}
        if unknown:
            out.append(Diagnostic(path, f"unknown variables {sorted(unknown)}"))
            return
        hi = sample_hi
        if isinstance(p, Lipschitz):
            if p.K <= 0:
                out.append(Diagnostic(path, "Lipschitz constant must be positive"))
            if p.T <= 0:
                out.append(Diagnostic(path, "clock bound T must be positive"))
                return
            hi = p.T
        if sampled_minimum(p.expr, hi) < -1e-12:
            out.append(Diagnostic(path, "price is negative somewhere in range"))
    else:
        out.append(Diagnostic(path, f"unknown price kind {type(p).__name__}"))


def validate(net: Network, queries: Sequence[Query] = (), *, signed_prices: bool = False) -> list:
    """Check every structural invariant; returns diagnostics (empty = valid).

    ``signed_prices`` admits negative rates and edge prices, which the
    piecewise-to-linear transform produces from pieces with negative slope or
    intercept.
    """
    out = []
    if not net.automata:
        out.append(Diagnostic("automata", "network needs at least one automaton"))
    names = [a.name for a in net.automata]
    for n in sorted({n for n in names if names.count(n) > 1}):
        out.append(Diagnostic("automata", f"duplicate automaton name {n!r}"))
    for g in net.global_clocks:
        if any(g in a.clocks for a in net.automata):
            out.append(Diagnostic("globalClocks", f"global clock {g!r} shadowed by a local clock"))
    sample_hi = max(1, _max_constant(net))
    for i, a in enumerate(net.automata):
        base = f"automata[{i}]"
        scope = net.scope(i)
        ids = a.location_ids()
        if not ids:
            out.append(Diagnostic(f"{base}.locations", "automaton needs at least one location"))
        for lid in sorted({x for x in ids if ids.count(x) > 1}):
            out.append(Diagnostic(f"{base}.locations", f"duplicate location id {lid!r}"))
        if a.initial is not None and a.initial not in ids:
            out.append(Diagnostic(f"{base}.initial", f"unknown location {a.initial!r}"))
        if len(set(a.clocks)) != len(a.clocks):
            out.append(Diagnostic(f"{base}.clocks", "duplicate clock name"))
        for j, loc in enumerate(a.locations):
            lp = f"{base}.locations[{j}]"
            _check_guard(loc.invariant, scope, f"{lp}.invariant", out)
            _check_price(loc.price, scope, f"{lp}.price", sample_hi, signed_prices, out)
        for j, e in enumerate(a.edges):
            ep = f"{base}.edges[{j}]"
            if e.source not in ids:
                out.append(Diagnostic(f"{ep}.from", f"unknown location {e.source!r}"))
            if e.target not in ids:
                out.append(Diagnostic(f"{ep}.to", f"unknown location {e.target!r}"))
            _check_guard(e.guard, scope, f"{ep}.guard", out)
            for r in e.resets:
                if r not in scope:
                    out.append(Diagnostic(f"{ep}.resets", f"unknown clock {r!r}"))
            if e.sync is not None:
                ch, d = e.sync
                if ch not in net.channels:
                    out.append(Diagnostic(f"{ep}.sync", f"unknown channel {ch!r}"))
                if d not in ("!", "?"):
                    out.append(Diagnostic(f"{ep}.sync", f"bad direction {d!r}"))
            if not isinstance(e.price, int) or (e.price < 0 and not signed_prices):
                out.append(Diagnostic(f"{ep}.price", "edge price must be a non-negative integer"))
    for k, q in enumerate(queries):
        qp = f"queries[{k}]"
        for field_name, sel in (("source", q.source), ("target", q.target)):
            if len(sel) != len(net.automata):
                out.append(Diagnostic(f"{qp}.{field_name}", "needs one entry per automaton"))
                continue
            for a, lid in zip(net.automata, sel):
                if lid is not None and lid not in a.location_ids():
                    out.append(Diagnostic(f"{qp}.{field_name}", f"unknown location {a.name}.{lid}"))
    return out


def ensure_valid(net: Network, queries: Sequence[Query] = (), **kw) -> None:
    diags = validate(net, queries, **kw)
    if diags:
        raise ModelError("; ".join(str(d) for d in diags))
