"""External SMT solver driver: satisfiability checks, decisions with verified witnesses, minimisation.

The solver is any SMT-LIB2 executable reading a script on stdin; the default
is ``z3 -in -smt2``. Choose another with ``SolverConfig(executable=...)`` or
the ``PTA_SOLVER`` environment variable.
"""

from __future__ import annotations

import enum
import math
import os
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import encode as en
from . import model as m
from . import semantics as sem
from .errors import DecodeIntegrityError, SolverError

ENV_VAR = "PTA_SOLVER"


@dataclass(frozen=True)
class SolverConfig:
    executable: str = ""
    args: tuple = ("-in", "-smt2")
    timeout: float = 60.0
    model_precision: int = 20

    def __post_init__(self):
        if not self.executable:
            object.__setattr__(self, "executable", os.environ.get(ENV_VAR) or "z3")
        if self.timeout <= 0:
            raise ValueError("solver timeout must be positive")
        if self.model_precision < 3:
            raise ValueError("model precision must be at least 3 digits")

    @property
    def command(self) -> list:
        return shlex.split(self.executable) + list(self.args)

    @property
    def nonlinear_tolerance(self) -> Fraction:
        return Fraction(1, 10 ** (self.model_precision - 2))


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"


@dataclass
class CheckResult:
    status: Status
    model: Optional[str] = None
    elapsed: float = 0.0
    stderr: str = ""


def _with_precision(script: str, digits: int) -> str:
    opts = f"(set-option :pp.decimal true)\n(set-option :pp.decimal_precision {digits})\n"
    marker = "(set-option :produce-models true)\n"
    if marker in script:
        return script.replace(marker, marker + opts, 1)
    return opts + script


def check(script: str, cfg: Optional[SolverConfig] = None) -> CheckResult:
    """Run ``script`` through the solver and report its first verdict."""
    cfg = cfg or SolverConfig()
    if "(set-logic QF_NRA)" in script:
        script = _with_precision(script, cfg.model_precision)
    t0 = time.monotonic()
    try:
        proc = subprocess.run(cfg.command, input=script, capture_output=True, text=True, timeout=cfg.timeout)
    except subprocess.TimeoutExpired:
        return CheckResult(Status.TIMEOUT, elapsed=time.monotonic() - t0)
    except OSError as e:
        raise SolverError(f"cannot start solver {cfg.executable!r}: {e}") from None
    elapsed = time.monotonic() - t0
    out = proc.stdout
    lines = out.lstrip().split("\n", 1)
    head = lines[0].strip()
    rest = lines[1] if len(lines) > 1 else ""
    try:
        status = Status(head)
    except ValueError:
        if head == "timeout":
            return CheckResult(Status.TIMEOUT, elapsed=elapsed, stderr=proc.stderr)
        raise SolverError(
            f"unexpected solver output (exit {proc.returncode}): {out[:400]!r} stderr: {proc.stderr[:400]!r}"
        ) from None
    if status is Status.SAT:
        if "(error" in rest:
            raise SolverError(f"solver reported an error while printing the model: {rest[:400]!r}")
        return CheckResult(status, rest, elapsed, proc.stderr)
    return CheckResult(status, None, elapsed, proc.stderr)


@dataclass
class Decision:
    status: Status
    witness: Optional[sem.Run] = None
    cost: Optional[Fraction] = None
    elapsed: float = 0.0

    @property
    def holds(self) -> Optional[bool]:
        if self.status is Status.SAT:
            return True
        if self.status is Status.UNSAT:
            return False
        return None


def _decide_instance(inst: en.BmcInstance, cfg: SolverConfig, bounded: bool = True) -> Decision:
    res = check(inst.script, cfg)
    if res.status is not Status.SAT:
        return Decision(res.status, elapsed=res.elapsed)
    tol = cfg.nonlinear_tolerance if inst.logic == "QF_NRA" else None
    run = en.decode_model(res.model, inst, tol)
    _, cost = sem.replay(inst.network, run)
    q = inst.query
    if bounded:
        slack = Fraction(0) if inst.logic == "QF_LRA" else cfg.nonlinear_tolerance
        ok = m.compare(cost, q.comparator, q.budget) or (
            slack and q.comparator in ("<", "<=", "=") and cost <= q.budget + slack
        )
        if not ok:
            raise DecodeIntegrityError(f"witness cost {cost} violates price {q.comparator} {q.budget}")
    return Decision(Status.SAT, run, cost, res.elapsed)


def decide(net: m.Network, q: m.Query, cfg: Optional[SolverConfig] = None, steps: Optional[int] = None) -> Decision:
    """Is there a run of ``q.steps`` steps from source to target whose price satisfies the budget?"""
    cfg = cfg or SolverConfig()
    return _decide_instance(en.build_instance(net, q, steps), cfg)


def reach(net: m.Network, source, target, steps: int, cfg: Optional[SolverConfig] = None) -> Decision:
    """Any witness run, ignoring price."""
    cfg = cfg or SolverConfig()
    q = m.Query(tuple(source), tuple(target), steps)
    inst = en.build_instance(net, q, unbounded=True)
    return _decide_instance(inst, cfg, bounded=False)


class OptStatus(enum.Enum):
    OPTIMAL = "optimal"
    BOUNDS_ONLY = "bounds-only"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass
class OptResult:
    status: OptStatus
    lower: Optional[Fraction] = None
    upper: Optional[Fraction] = None
    witness: Optional[sem.Run] = None
    solver_seconds: float = 0.0
    queries: int = 0
    history: list = field(default_factory=list)

    @property
    def infeasible(self) -> bool:
        return self.status is OptStatus.INFEASIBLE


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with the smallest denominator in ``(lo, hi]``."""
    if not lo < hi:
        raise ValueError("empty interval")
    first, last = math.floor(lo) + 1, math.floor(hi)
    if first <= last:
        return Fraction(min(max(0, first), last))
    # no integer inside: continue on the reciprocal of the fractional parts
    base = first - 1
    return base + 1 / _simplest_from(1 / (hi - base), None if lo == base else 1 / (lo - base))


def _simplest_from(lo: Fraction, hi: Optional[Fraction]) -> Fraction:
    # smallest denominator in [lo, hi), hi=None meaning unbounded; lo >= 1
    c = math.ceil(lo)
    if hi is None or c < hi:
        return Fraction(c)
    base = c - 1
    return base + 1 / simplest_between(1 / (hi - base), 1 / (lo - base))


def minimize(
    net: m.Network,
    source,
    target,
    steps: int,
    cfg: Optional[SolverConfig] = None,
    lo=0,
    hi=None,
    gamma=Fraction(1, 1000),
    max_queries: int = 200,
) -> OptResult:
    """Bracket the least run cost by binary search over budget decisions.

    ``hi=None`` probes without a budget. ``lower`` is always a refuted
    budget (no run costs ``<= lower``) or, once a strict improvement on the
    witness is refuted, the witness cost itself; ``upper`` is the replayed cost
    of ``witness``.
    """
    cfg = cfg or SolverConfig()
    lo = m.as_rational(lo)
    gamma = m.as_rational(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if hi is not None and m.as_rational(hi) < lo:
        raise ValueError("lo must not exceed hi")
    source, target = tuple(source), tuple(target)
    res = OptResult(OptStatus.UNKNOWN)

    def ask(comparator, budget):
        q = m.Query(source, target, steps, budget if budget is not None else 0, comparator)
        inst = en.build_instance(net, q, unbounded=budget is None)
        d = _decide_instance(inst, cfg, bounded=budget is not None)
        res.queries += 1
        res.solver_seconds += d.elapsed
        res.history.append((comparator, budget, d.status.value))
        return d

    d = ask("<=", None if hi is None else m.as_rational(hi))
    if d.status is Status.UNSAT:
        res.status = OptStatus.INFEASIBLE
        return res
    if d.status is not Status.SAT:
        return res
    res.upper, res.witness = d.cost, d.witness
    lower = None
    exact = not en.uses_nonlinear(net)
    # with linear prices the optimum is usually attained: refuting "< upper"
    # settles it at once; after a few improving witnesses fall back to bisection
    strict_left = 3 if exact else 0

    def admit(d):
        res.upper, res.witness = d.cost, d.witness

    if lo < res.upper:
        d = ask("<=", lo)
        if d.status is Status.UNSAT:
            lower = lo
        elif d.status is Status.SAT:
            admit(d)
        else:
            res.status = OptStatus.UNKNOWN
            return res
    while lower is None or res.upper - lower > gamma:
        if res.queries >= max_queries:
            break
        if strict_left or lower is None:
            strict_left = max(0, strict_left - 1)
            d = ask("<", res.upper)
            if d.status is Status.UNSAT:
                lower = res.upper
                break
        else:
            mid = (lower + res.upper) / 2
            d = ask("<=", mid)
            if d.status is Status.UNSAT:
                lower = mid
                continue
        if d.status is Status.SAT:
            admit(d)
        else:
            break
    # optima of linear instances are rationals with small denominators: probe
    # the simplest one in the bracket, then confirm nothing beats the witness
    tries = 3 if exact else 0
    while tries and lower is not None and lower < res.upper <= lower + gamma and res.queries < max_queries:
        tries -= 1
        s = simplest_between(lower, res.upper)
        if s < res.upper:
            d = ask("<=", s)
            if d.status is Status.UNSAT:
                lower = s
                continue
            if d.status is not Status.SAT:
                break
            admit(d)
        d = ask("<", res.upper)
        if d.status is Status.UNSAT:
            lower = res.upper
        elif d.status is Status.SAT:
            admit(d)
        else:
            break
    res.lower = lower
    if lower is None or res.upper - lower > gamma:
        res.status = OptStatus.UNKNOWN if lower is None else OptStatus.BOUNDS_ONLY
        if lower is not None and d.status not in (Status.SAT, Status.UNSAT):
            res.status = OptStatus.UNKNOWN
    else:
        res.status = OptStatus.OPTIMAL if lower == res.upper else OptStatus.BOUNDS_ONLY
    return res


def result_to_json(net: m.Network, r: OptResult) -> dict:
    from .parser import format_rational

    return {
        "status": r.status.value,
        "lower": None if r.lower is None else format_rational(r.lower),
        "upper": None if r.upper is None else format_rational(r.upper),
        "witness": None if r.witness is None else sem.run_to_json(net, r.witness),
        "solverTimeSeconds": round(r.solver_seconds, 3),
        "queries": r.queries,
    }
