"""Bounded-step SMT-LIB2 encoding of cost-bounded reachability, and model decoding.

Per step ``k`` the script declares one-hot location booleans ``s_A_l_k``, one
real per clock holding the global time of its last reset (``x_A_c_k``; the
clock's value is ``z_k - x_A_c_k``), the global time ``z_k`` and the
accumulated price ``price_k``. Each transition ``k -> k+1`` is a delay
(``delay_k``), a null step (``null_k``) or a discrete switch (neither); the
switch fires edge booleans ``e_A_j_k`` and, for synchronised edges, the
channel booleans ``snd_A_c_k`` / ``rcv_A_c_k``.

Constraints, in order of appearance in the script:

* step 0: source locations, every reset timestamp and ``z_0`` equal 0,
  ``price_0 = 0``;
* every step: exactly one location per automaton, location invariants over
  clock values;
* switch: guards over clock values, reset clocks take the timestamp ``z_k+1``,
  others keep theirs, ``z`` unchanged, price grows by the fired edges' prices;
  either one internal edge fires, or one sender and one receiver on the same
  channel;
* delay: locations and timestamps frozen, ``z`` strictly increases, price grows
  by every automaton's delay price of dwell ``z_k+1 - z_k``;
* null: everything frozen; null is absorbing and two delays never follow
  each other;
* step ``N``: target locations and ``price_N <op> budget``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Optional

from . import expr as ex
from . import model as m
from . import semantics as sem
from .errors import DecodeIntegrityError, EncodeError, InadmissibleStepError, NonCanonicalRunError

_SIMPLE = re.compile(r"[^A-Za-z0-9~!@$%^&*_+=<>.?/-]")

NRA_TOLERANCE = Fraction(1, 10**6)


def _sym(text: str) -> str:
    return _SIMPLE.sub("_", text)


@dataclass
class BmcInstance:
    """Variable layout of one encoded query; ``script`` holds the SMT-LIB2 text."""

    network: m.Network
    query: m.Query
    steps: int
    logic: str = "QF_LRA"
    loc: dict = field(default_factory=dict)       # (automaton, location id, k) -> symbol
    clock: dict = field(default_factory=dict)     # (qualified clock, k) -> symbol
    edge: dict = field(default_factory=dict)      # (automaton, edge index, k) -> symbol
    chan: dict = field(default_factory=dict)      # (automaton, channel, "!"|"?", k) -> symbol
    z: list = field(default_factory=list)
    price: list = field(default_factory=list)
    delay: list = field(default_factory=list)
    null: list = field(default_factory=list)
    script: str = ""
    _taken: set = field(default_factory=set, repr=False)

    def fresh(self, wanted: str) -> str:
        name = _sym(wanted)
        if name in self._taken:
            k = 1
            while f"{name}~{k}" in self._taken:
                k += 1
            name = f"{name}~{k}"
        self._taken.add(name)
        return name

    @property
    def symbols(self) -> list:
        """Every declared symbol, in declaration order."""
        return list(self._decl_order)

    def value_query(self) -> str:
        """A ``get-value`` command over the variables :func:`decode_model` reads."""
        names = list(self.z) + list(self.price) + list(self.delay) + list(self.null)
        names += list(self.loc.values()) + list(self.clock.values()) + list(self.edge.values())
        return "(get-value (" + " ".join(names) + "))\n" if names else ""


def uses_nonlinear(net: m.Network) -> bool:
    return any(
        isinstance(loc.price, (m.Polynomial, m.Lipschitz)) for a in net.automata for loc in a.locations
    )


def _lin(slope, intercept, dwell: str) -> str:
    slope, intercept = Fraction(slope), Fraction(intercept)
    if slope == 0:
        return ex.smt_number(intercept)
    term = dwell if slope == 1 else f"(* {ex.smt_number(slope)} {dwell})"
    if intercept == 0:
        return term
    return f"(+ {term} {ex.smt_number(intercept)})"


def piecewise_price_assert(s: m.PwlStructure, dwell: str, delta: str) -> str:
    """Linear-arithmetic assertion ``delta = f(dwell)`` for a piecewise structure."""
    n = len(s)
    if n == 1 and s.values[0] == s.pieces[0][1]:
        return f"(= {delta} {_lin(*s.pieces[0], dwell)})"
    cases = []
    for i in range(n):
        p = ex.smt_number(s.points[i])
        cases.append(f"(and (= {dwell} {p}) (= {delta} {ex.smt_number(s.values[i])}))")
        hi = s.upper(i)
        rng = f"(< {p} {dwell})" if hi is None else f"(< {p} {dwell}) (< {dwell} {ex.smt_number(hi)})"
        cases.append(f"(and {rng} (= {delta} {_lin(*s.pieces[i], dwell)}))")
    return "(or " + " ".join(cases) + ")"


def _price_assert(p, dwell: str, delta: str, clock_terms: dict) -> Optional[str]:
    if isinstance(p, m.ConstantRate):
        return f"(= {delta} {_lin(p.rate, 0, dwell)})"
    if isinstance(p, m.Piecewise):
        return piecewise_price_assert(p.structure, dwell, delta)
    if isinstance(p, (m.Polynomial, m.Lipschitz)):
        terms = dict(clock_terms)
        terms[ex.DWELL] = dwell
        body = f"(= {delta} {ex.to_smt(p.expr, terms)})"
        if isinstance(p, m.Lipschitz):
            bound = ex.smt_number(p.T)
            return f"(and (<= {dwell} {bound}) {body})"
        return body
    raise EncodeError(f"unsupported price kind {type(p).__name__}")


def _conj(parts) -> str:
    parts = [p for p in parts if p != "true"]
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"


def _disj(parts) -> str:
    parts = list(parts)
    if not parts:
        return "false"
    if len(parts) == 1:
        return parts[0]
    return "(or " + " ".join(parts) + ")"


def _count(bools) -> str:
    terms = [f"(ite {b} 1 0)" for b in bools]
    if len(terms) == 1:
        return terms[0]
    return "(+ " + " ".join(terms) + ")"


_CMP = {"<": "<", "<=": "<=", "=": "=", ">=": ">=", ">": ">"}


def build_instance(net: m.Network, q: m.Query, steps: Optional[int] = None, unbounded: bool = False) -> BmcInstance:
    """Lay out the variables and emit the script for ``q`` with step bound ``steps``.

    ``unbounded`` drops the final budget assertion (plain reachability).
    """
    N = q.steps if steps is None else steps
    if N < 0:
        raise EncodeError("step bound must be non-negative")
    diags = m.validate(net, [q], signed_prices=True)
    if diags:
        raise EncodeError("; ".join(str(d) for d in diags))
    inst = BmcInstance(net, q, N, "QF_NRA" if uses_nonlinear(net) else "QF_LRA")
    inst._decl_order = []
    decls = []

    def declare(name_wanted, sort):
        name = inst.fresh(name_wanted)
        decls.append(f"(declare-fun {name} () {sort})")
        inst._decl_order.append(name)
        return name

    clocks = net.clock_names()
    qual_sym = {}
    for i, a in enumerate(net.automata):
        for c in a.clocks:
            qual_sym[f"{a.name}.{c}"] = f"{a.name}_{c}"
    for g in net.global_clocks:
        qual_sym[g] = g

    for k in range(N + 1):
        inst.z.append(declare(f"z_{k}", "Real"))
        inst.price.append(declare(f"price_{k}", "Real"))
        for i, a in enumerate(net.automata):
            for loc in a.locations:
                inst.loc[(i, loc.id, k)] = declare(f"s_{a.name}_{loc.id}_{k}", "Bool")
        for cq in clocks:
            inst.clock[(cq, k)] = declare(f"x_{qual_sym[cq]}_{k}", "Real")
    priced = [
        i for i, a in enumerate(net.automata)
        if any(not (isinstance(l.price, m.ConstantRate) and l.price.rate == 0) for l in a.locations)
    ]
    dp = {}
    for k in range(N):
        inst.delay.append(declare(f"delay_{k}", "Bool"))
        inst.null.append(declare(f"null_{k}", "Bool"))
        for i, a in enumerate(net.automata):
            for j, e in enumerate(a.edges):
                inst.edge[(i, j, k)] = declare(f"e_{a.name}_{j}_{k}", "Bool")
            for ch, d in sorted({e.sync for e in a.edges if e.sync}):
                kind = "snd" if d == "!" else "rcv"
                inst.chan[(i, ch, d, k)] = declare(f"{kind}_{a.name}_{ch}_{k}", "Bool")
        for i in priced:
            dp[(i, k)] = declare(f"dprice_{net.automata[i].name}_{k}", "Real")

    asserts = []
    A = asserts.append

    def value(cq, k):
        return f"(- {inst.z[k]} {inst.clock[(cq, k)]})"

    def guard(i, g, k):
        scope = net.scope(i)
        return _conj(f"({a.op if a.op != '=' else '='} {value(scope[a.clock], k)} {a.bound})" for a in g)

    # initial step
    src = q.resolved_source(net)
    for i, a in enumerate(net.automata):
        A(inst.loc[(i, src[i], 0)])
    A(f"(= {inst.z[0]} 0)")
    for cq in clocks:
        A(f"(= {inst.clock[(cq, 0)]} 0)")
    A(f"(= {inst.price[0]} 0)")

    for k in range(N + 1):
        for i, a in enumerate(net.automata):
            ls = [inst.loc[(i, l.id, k)] for l in a.locations]
            if len(ls) > 1:
                A(_disj(ls))
                for u in range(len(ls)):
                    for v in range(u + 1, len(ls)):
                        A(f"(not (and {ls[u]} {ls[v]}))")
            else:
                A(ls[0])
            for l in a.locations:
                if l.invariant:
                    A(f"(=> {inst.loc[(i, l.id, k)]} {guard(i, l.invariant, k)})")

    for k in range(N):
        d, n = inst.delay[k], inst.null[k]
        sw = f"(not (or {d} {n}))"
        A(f"(not (and {d} {n}))")
        all_edges, internal, synced = [], [], []
        resets = {cq: [] for cq in clocks}
        switch_price = []
        for i, a in enumerate(net.automata):
            mine = []
            for j, e in enumerate(a.edges):
                ev = inst.edge[(i, j, k)]
                mine.append(ev)
                all_edges.append(ev)
                (synced if e.sync else internal).append(ev)
                A(f"(=> {ev} {_conj([sw, inst.loc[(i, e.source, k)], guard(i, e.guard, k), inst.loc[(i, e.target, k + 1)]])})")
                for r in e.resets:
                    resets[net.qualify(i, r)].append(ev)
                if e.price:
                    switch_price.append(f"(ite {ev} {ex.smt_number(e.price)} 0)")
            if len(mine) > 1:
                A(f"(<= {_count(mine)} 1)")
            frame = _conj(f"(= {inst.loc[(i, l.id, k)]} {inst.loc[(i, l.id, k + 1)]})" for l in a.locations)
            A(f"(=> (not {_disj(mine)}) {frame})")
            for (ii, ch, dr, kk), cv in inst.chan.items():
                if ii == i and kk == k:
                    fired = [inst.edge[(i, j, k)] for j, e in enumerate(a.edges) if e.sync == (ch, dr)]
                    A(f"(= {cv} {_disj(fired)})")
        for ch in net.channels:
            snd = [cv for (i, c, dr, kk), cv in inst.chan.items() if kk == k and c == ch and dr == "!"]
            rcv = [cv for (i, c, dr, kk), cv in inst.chan.items() if kk == k and c == ch and dr == "?"]
            if snd or rcv:
                A(f"(= {_disj(snd)} {_disj(rcv)})")
        if all_edges:
            single = _conj([f"(= {_count(all_edges)} 1)", f"(not {_disj(synced)})" if synced else "true"])
            pair = _conj([f"(= {_count(all_edges)} 2)", f"(not {_disj(internal)})" if internal else "true"])
            A(f"(=> {sw} {_disj([single, pair] if synced else [single])})")
        else:
            A(f"(not {sw})")
        for cq in clocks:
            nxt, cur = inst.clock[(cq, k + 1)], inst.clock[(cq, k)]
            if resets[cq]:
                A(f"(= {nxt} (ite {_disj(resets[cq])} {inst.z[k + 1]} {cur}))")
            else:
                A(f"(= {nxt} {cur})")
        z0, z1 = inst.z[k], inst.z[k + 1]
        A(f"(=> {d} (> {z1} {z0}))")
        A(f"(=> (not {d}) (= {z1} {z0}))")
        p0, p1 = inst.price[k], inst.price[k + 1]
        A(f"(=> {n} (= {p1} {p0}))")
        A(f"(=> {sw} (= {p1} {'(+ ' + p0 + ' ' + ' '.join(switch_price) + ')' if switch_price else p0}))")
        dwell = f"(- {z1} {z0})"
        for i in priced:
            a = net.automata[i]
            scope = net.scope(i)
            terms = {local: value(qc, k) for local, qc in scope.items()}
            for l in a.locations:
                pa = _price_assert(l.price, dwell, dp[(i, k)], terms)
                A(f"(=> (and {d} {inst.loc[(i, l.id, k)]}) {pa})")
        gain = [dp[(i, k)] for i in priced]
        A(f"(=> {d} (= {p1} {'(+ ' + p0 + ' ' + ' '.join(gain) + ')' if gain else p0}))")
        if k + 1 < N:
            A(f"(=> {d} (not {inst.delay[k + 1]}))")
            A(f"(=> {n} {inst.null[k + 1]})")

    for i, t in enumerate(q.target):
        if t is not None:
            A(inst.loc[(i, t, N)])
    b = ex.smt_number(q.budget)
    if unbounded:
        pass
    elif q.comparator == "!=":
        A(f"(not (= {inst.price[N]} {b}))")
    else:
        A(f"({_CMP[q.comparator]} {inst.price[N]} {b})")

    head = [
        f"; bounded reachability: {N} steps" + ("" if unbounded else f", price {q.comparator} {q.budget}"),
        "(set-option :produce-models true)",
        f"(set-logic {inst.logic})",
    ]
    body = [f"(assert {a})" for a in asserts]
    inst.script = "\n".join(head + decls + body + ["(check-sat)", "(get-model)"]) + "\n"
    return inst


def encode(net: m.Network, q: m.Query, steps: Optional[int] = None) -> str:
    """SMT-LIB2 script for ``q`` (step bound overridable)."""
    return build_instance(net, q, steps).script


# ---------------------------------------------------------------------------
# s-expressions and model decoding

_TOKEN = re.compile(r'\s*(?:(\()|(\))|(\|[^|]*\|)|("(?:[^"]|"")*")|(;[^\n]*)|([^\s()|";]+))')


def parse_sexprs(text: str) -> list:
    """Tokenise SMT-LIB2 text into nested lists of atoms."""
    stack = [[]]
    pos = 0
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ValueError(f"cannot tokenise at offset {pos}: {text[pos:pos + 20]!r}")
        pos = mt.end()
        lp, rp, quoted, string, comment, atom = mt.groups()
        if lp:
            stack.append([])
        elif rp:
            if len(stack) == 1:
                raise ValueError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        elif quoted:
            stack[-1].append(quoted[1:-1])
        elif string:
            stack[-1].append(string)
        elif atom:
            stack[-1].append(atom)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


class _Approx(Fraction):
    """A decimal the solver marked as an approximation (trailing '?')."""


def _value(v):
    if v == "true":
        return True
    if v == "false":
        return False
    if isinstance(v, str):
        approx = v.endswith("?")
        try:
            q = Fraction(Decimal(v.rstrip("?")))
        except InvalidOperation:
            raise DecodeIntegrityError(f"cannot read solver value {v!r}") from None
        return _Approx(q) if approx else q
    if isinstance(v, list) and v:
        if v[0] == "-" and len(v) == 2:
            x = _value(v[1])
            return type(x)(-x)
        if v[0] == "/" and len(v) == 3:
            a, b = _value(v[1]), _value(v[2])
            q = Fraction(a) / Fraction(b)
            return _Approx(q) if isinstance(a, _Approx) or isinstance(b, _Approx) else q
        if v[0] == "root-obj":
            raise DecodeIntegrityError("solver returned an algebraic number; request decimal output")
    raise DecodeIntegrityError(f"cannot read solver value {v!r}")


def read_assignment(text: str) -> dict:
    """Collect ``name -> value`` from ``get-model`` and/or ``get-value`` output."""
    try:
        forms = parse_sexprs(text)
    except ValueError as e:
        raise DecodeIntegrityError(f"malformed model output: {e}") from None
    out = {}

    def visit(form):
        if not isinstance(form, list):
            return
        if len(form) == 5 and form[0] == "define-fun" and form[2] == []:
            out[form[1]] = _value(form[4])
            return
        if form and all(isinstance(p, list) and len(p) == 2 and isinstance(p[0], str) for p in form):
            # get-value response: ((name value) ...)
            for name, v in form:
                out.setdefault(name, _value(v))
            return
        for sub in form:
            visit(sub)

    for f in forms:
        visit(f)
    return out


def _snap(q: Fraction, tol: Fraction) -> Fraction:
    """Nearest simple rational to an approximate solver value."""
    if not isinstance(q, _Approx):
        return Fraction(q)
    return Fraction(q).limit_denominator(int(1 / tol))


def decode_model(model_text: str, inst: BmcInstance, tolerance=None) -> sem.Run:
    """Rebuild the run a satisfying assignment describes and check it by replay.

    Exact rational models must replay exactly; models containing approximate
    decimals are snapped to nearby rationals and checked within ``tolerance``
    (default 1e-6).
    """
    net, N = inst.network, inst.steps
    vals = read_assignment(model_text)
    approx = any(isinstance(v, _Approx) for v in vals.values())
    tol = Fraction(0) if not approx else (NRA_TOLERANCE if tolerance is None else Fraction(tolerance))
    snap_tol = tol if tol else NRA_TOLERANCE

    def real(name):
        if name not in vals:
            raise DecodeIntegrityError(f"model lacks a value for {name}")
        return _snap(vals[name], snap_tol)

    def flag(name):
        return bool(vals.get(name, False))

    steps = []
    for k in range(N):
        if flag(inst.delay[k]):
            steps.append(sem.Delay(real(inst.z[k + 1]) - real(inst.z[k])))
        elif flag(inst.null[k]):
            steps.append(sem.Null())
        else:
            fired = [(i, j) for (i, j, kk), v in inst.edge.items() if kk == k and flag(v)]
            if len(fired) == 1:
                steps.append(sem.Switch(*fired[0]))
            elif len(fired) == 2:
                (i1, j1), (i2, j2) = fired
                if net.automata[i1].edges[j1].receives:
                    (i1, j1), (i2, j2) = (i2, j2), (i1, j1)
                steps.append(sem.Handshake(i1, j1, i2, j2))
            else:
                raise DecodeIntegrityError(f"step {k}: {len(fired)} edges fire in one switch")
    while steps and isinstance(steps[-1], sem.Null):
        steps.pop()
    start = sem.initial_configuration(net, inst.query.resolved_source(net))
    run = sem.Run(start, tuple(steps))
    try:
        confs = sem.trace(net, run)
    except (InadmissibleStepError, NonCanonicalRunError) as e:
        raise DecodeIntegrityError(f"decoded run does not replay: {e}") from None
    for k, c in enumerate(confs):
        for i, a in enumerate(net.automata):
            claimed = [l.id for l in a.locations if flag(inst.loc[(i, l.id, k)])]
            if claimed != [c.locs[i]]:
                raise DecodeIntegrityError(f"step {k}: model puts {a.name} in {claimed}, replay in {c.locs[i]}")
        zk = real(inst.z[k])
        for cq, v in c.nu.items():
            if abs((zk - real(inst.clock[(cq, k)])) - v) > tol:
                raise DecodeIntegrityError(f"step {k}: clock {cq} differs between model and replay")
    cost = confs[-1].u - start.u
    if abs(cost - real(inst.price[N])) > tol:
        raise DecodeIntegrityError(f"replayed cost {cost} differs from model price {real(inst.price[N])}")
    return run
