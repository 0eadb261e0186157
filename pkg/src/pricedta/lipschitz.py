"""Sandwich approximation of Lipschitz prices and the three-valued epsilon decision.

For a price ``f`` with Lipschitz constant ``K`` sampled every ``delta`` time
units, on each open interval ``(a, a+delta)``::

    (f(a) + f(a+delta) - K*delta) / 2  <=  f  <=  (f(a) + f(a+delta) + K*delta) / 2

Both bounds are constant pieces; at the sample points they equal ``f``. The
lower one is clamped at 0 since prices are non-negative. Replacing every
Lipschitz price by its lower (upper) bound gives automata whose optimal costs
bracket the original one, and the gap per delay is at most ``K*delta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional

from . import expr as ex
from . import model as m
from .errors import ModelError, PtaError


@dataclass(frozen=True)
class ApproxConfig:
    epsilon: Fraction
    K: Fraction
    T: Fraction
    D: Fraction
    delta: Fraction

    def __post_init__(self):
        for name in ("epsilon", "K", "T", "D", "delta"):
            v = m.as_rational(getattr(self, name))
            object.__setattr__(self, name, v)
            if v <= 0:
                raise ModelError(f"{name} must be positive")
        if self.delta > self.T:
            raise ModelError("sampling period exceeds the clock bound")

    @classmethod
    def for_epsilon(cls, epsilon, K, T, D) -> "ApproxConfig":
        delta = choose_delta(epsilon, K, D)
        return cls(epsilon, K, T, D, min(delta, m.as_rational(T)))


def choose_delta(epsilon, K, D) -> Fraction:
    """Sampling period so that ``D`` delays of gap ``K*delta`` stay within ``epsilon``."""
    epsilon, K, D = (m.as_rational(v) for v in (epsilon, K, D))
    if min(epsilon, K, D) <= 0:
        raise ModelError("epsilon, K and D must be positive")
    return epsilon / (D * K)


def _sample(p: m.Lipschitz, t: Fraction) -> Fraction:
    extra = ex.free_vars(p.expr) - {ex.DWELL}
    if extra:
        raise ModelError(f"sandwich needs a price of the dwell time only; found {sorted(extra)}")
    return Fraction(ex.evaluate(p.expr, {ex.DWELL: t}))


def sandwich(p: m.Lipschitz, cfg: ApproxConfig) -> tuple:
    """Lower and upper piecewise-constant bounds of ``p`` on ``[0, T]``."""
    if p.K <= 0:
        raise ModelError("Lipschitz constant must be positive")
    K, d = p.K, cfg.delta
    n = math.ceil(p.T / d)
    # the last interval is cut short at T rather than sampling past it
    points = [k * d for k in range(n)] + [p.T]
    vals = [_sample(p, t) for t in points]
    lo_pieces, hi_pieces = [], []
    for k in range(n):
        mid = (vals[k] + vals[k + 1]) / 2
        w = points[k + 1] - points[k]
        lo_pieces.append((Fraction(0), max(Fraction(0), mid - K * w / 2)))
        hi_pieces.append((Fraction(0), mid + K * w / 2))
    # dwell beyond the sampled range is outside the Lipschitz domain
    lo_pieces.append((Fraction(0), vals[-1]))
    hi_pieces.append((Fraction(0), vals[-1]))
    lower = m.PwlStructure.make(points, vals, lo_pieces)
    upper = m.PwlStructure.make(points, vals, hi_pieces)
    return lower, upper


def build_bounding_automata(net: m.Network, cfg: ApproxConfig) -> tuple:
    """Copies of ``net`` with every Lipschitz price replaced by its lower/upper bound."""
    lows, highs = [], []
    for a in net.automata:
        llocs, ulocs = [], []
        for loc in a.locations:
            p = loc.price
            if isinstance(p, m.Lipschitz):
                lo, hi = sandwich(p, cfg)
                llocs.append(replace(loc, price=m.Piecewise(lo)))
                ulocs.append(replace(loc, price=m.Piecewise(hi)))
            elif isinstance(p, m.Polynomial):
                raise ModelError(f"location {a.name}.{loc.id} has a polynomial price without a Lipschitz constant")
            else:
                llocs.append(loc)
                ulocs.append(loc)
        lows.append(replace(a, locations=tuple(llocs)))
        highs.append(replace(a, locations=tuple(ulocs)))
    return replace(net, automata=tuple(lows)), replace(net, automata=tuple(highs))


def lipschitz_bound(net: m.Network) -> tuple:
    """Largest ``K`` and the shared ``T`` over the network's Lipschitz prices."""
    ks, ts = [], set()
    for a in net.automata:
        for loc in a.locations:
            if isinstance(loc.price, m.Lipschitz):
                ks.append(loc.price.K)
                ts.add(loc.price.T)
    if not ks:
        raise ModelError("network has no Lipschitz prices")
    if len(ts) != 1:
        raise ModelError("all Lipschitz prices must share the clock bound T")
    return max(ks), ts.pop()


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    BOUNDARY = "boundary"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class EpsDecision:
    verdict: Verdict
    lower: Optional[Fraction]
    upper: Optional[Fraction]


# engine(network, source, target, steps) -> object with .lower / .upper
Engine = Callable


def eps_decide(net: m.Network, source, target, steps: int, budget, cfg: ApproxConfig, engine: Engine) -> EpsDecision:
    """Decide ``OptCost <= budget + epsilon`` from the two bounding automata.

    ``engine`` is called on the lower and upper automata and must return an
    object with certified ``lower`` / ``upper`` bounds on their optimal costs
    (``None`` when unavailable); an ``infeasible`` attribute that is true
    means no run reaches the target at all.
    """
    budget = m.as_rational(budget)
    a_l, a_u = build_bounding_automata(net, cfg)
    try:
        r_low = engine(a_l, source, target, steps)
        if getattr(r_low, "infeasible", False):
            # the bounding automata share every guard with the original
            return EpsDecision(Verdict.NO, None, None)
        low = r_low.lower
        high = engine(a_u, source, target, steps).upper
    except PtaError:
        return EpsDecision(Verdict.UNKNOWN, None, None)
    limit = budget + cfg.epsilon
    if high is not None and high <= limit:
        return EpsDecision(Verdict.YES, low, high)
    if low is not None and low > limit:
        return EpsDecision(Verdict.NO, low, high)
    if low is None or high is None:
        return EpsDecision(Verdict.UNKNOWN, low, high)
    return EpsDecision(Verdict.BOUNDARY, low, high)
