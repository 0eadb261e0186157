"""Benchmark generators: airport landing schedules and two-counter machine gadgets."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import model as m
from . import semantics as sem
from .errors import ModelError
from .parser import ModelDocument

# ---------------------------------------------------------------------------
# airport landing


@dataclass(frozen=True)
class PlaneSpec:
    earliest: int
    target: int
    latest: int
    early_rate: int
    late_rate: int
    cls: int = 0

    def __post_init__(self):
        if min(self.earliest, self.early_rate, self.late_rate, self.cls) < 0:
            raise ModelError("plane parameters must be non-negative")
        if not self.earliest <= self.target <= self.latest:
            raise ModelError(f"inconsistent landing window {self.earliest} <= {self.target} <= {self.latest}")


GLOBAL_CLOCK = "t"
RUNWAY_CLOCK = "s"
ALP_BUDGET = 800


def land_channel(runway: int, cls: int) -> str:
    return f"land_r{runway}_c{cls}"


def _plane(i: int, p: PlaneSpec, runways: int) -> m.PricedAutomaton:
    t = GLOBAL_CLOCK
    locs = (
        m.Location("Approach", (m.GuardAtom(t, "<=", p.target),), m.ConstantRate(0)),
        m.Location("EarlyLanded", (m.GuardAtom(t, "<=", p.target),), m.ConstantRate(p.early_rate)),
        m.Location("Late", (m.GuardAtom(t, "<=", p.latest),), m.ConstantRate(p.late_rate)),
        m.Location("Landed"),
    )
    edges = []
    for r in range(runways):
        ch = (land_channel(r, p.cls), "!")
        edges.append(m.Edge("Approach", "EarlyLanded", (m.GuardAtom(t, ">=", p.earliest),), (), ch))
        edges.append(m.Edge("Late", "Landed", (m.GuardAtom(t, ">=", p.earliest), m.GuardAtom(t, "<=", p.latest)), (), ch))
    edges.append(m.Edge("Approach", "Late", (m.GuardAtom(t, "=", p.target),)))
    edges.append(m.Edge("EarlyLanded", "Landed", (m.GuardAtom(t, ">=", p.target),)))
    return m.PricedAutomaton(f"P{i}", locs, tuple(edges), (), "Approach")


def _runway(r: int, classes: Sequence[int], separation) -> m.PricedAutomaton:
    s = RUNWAY_CLOCK
    locs = [m.Location("Free")] + [m.Location(f"Last_c{k}") for k in classes]
    edges = []
    for k in classes:
        ch = (land_channel(r, k), "?")
        edges.append(m.Edge("Free", f"Last_c{k}", (), (s,), ch))
        for j in classes:
            gap = int(separation[j][k])
            guard = (m.GuardAtom(s, ">=", gap),) if gap > 0 else ()
            edges.append(m.Edge(f"Last_c{j}", f"Last_c{k}", guard, (s,), ch))
    return m.PricedAutomaton(f"R{r}", tuple(locs), tuple(edges), (s,), "Free")


def gen_alp(planes: Sequence[PlaneSpec], runways: int, separation, budget=ALP_BUDGET, steps: Optional[int] = None) -> ModelDocument:
    """Planes land through per-runway channels; runways enforce wake separation.

    A plane waits in ``Approach`` until it lands or its target time passes.
    Landing early leads to ``EarlyLanded``, which pays the early rate until
    the target time; after the target the plane pays the late rate in
    ``Late`` until it lands.
    """
    if runways < 1:
        raise ModelError("at least one runway is needed")
    if not planes:
        raise ModelError("at least one plane is needed")
    classes = sorted({p.cls for p in planes})
    for j in classes:
        for k in classes:
            try:
                if int(separation[j][k]) < 0:
                    raise ModelError("separations must be non-negative")
            except (IndexError, TypeError):
                raise ModelError(f"separation matrix has no entry for classes {j}, {k}") from None
    autos = [_plane(i, p, runways) for i, p in enumerate(planes)]
    autos += [_runway(r, classes, separation) for r in range(runways)]
    channels = tuple(land_channel(r, k) for r in range(runways) for k in classes)
    net = m.Network(tuple(autos), channels, (GLOBAL_CLOCK,))
    n = len(planes)
    target = ("Landed",) * n + (None,) * runways
    q = m.Query((None,) * len(autos), target, 4 * n + 1 if steps is None else steps, budget)
    meta = {"generator": "alp", "planes": str(n), "runways": str(runways)}
    return ModelDocument(net, (q,), meta)


@dataclass(frozen=True)
class Landing:
    plane: int
    runway: int
    time: Fraction


def landing_schedule(net: m.Network, run: sem.Run) -> list:
    """Landing events of a run, timed by summing its delays."""
    now = run.start.nu.get(GLOBAL_CLOCK, Fraction(0))
    out = []
    for s in run.steps:
        if isinstance(s, sem.Delay):
            now += s.t
        elif isinstance(s, sem.Handshake):
            sender = net.automata[s.sender].name
            receiver = net.automata[s.receiver].name
            if sender.startswith("P") and receiver.startswith("R"):
                out.append(Landing(int(sender[1:]), int(receiver[1:]), now))
    return out


def schedule_problems(planes: Sequence[PlaneSpec], separation, schedule: Sequence[Landing]) -> list:
    """Window and separation violations of a landing schedule (empty if valid)."""
    bad = []
    seen = {}
    for ev in schedule:
        if ev.plane in seen:
            bad.append(f"plane {ev.plane} lands twice")
        seen[ev.plane] = ev
        p = planes[ev.plane]
        if not p.earliest <= ev.time <= p.latest:
            bad.append(f"plane {ev.plane} lands at {ev.time} outside [{p.earliest}, {p.latest}]")
    for i in range(len(planes)):
        if i not in seen:
            bad.append(f"plane {i} never lands")
    by_runway = {}
    for ev in schedule:
        by_runway.setdefault(ev.runway, []).append(ev)
    for r, evs in by_runway.items():
        evs.sort(key=lambda e: e.time)
        for a, b in zip(evs, evs[1:]):
            gap = separation[planes[a.plane].cls][planes[b.plane].cls]
            if b.time - a.time < gap:
                bad.append(f"runway {r}: planes {a.plane} and {b.plane} land {b.time - a.time} apart, need {gap}")
    return bad


def schedule_cost(planes: Sequence[PlaneSpec], schedule: Sequence[Landing]) -> Fraction:
    total = Fraction(0)
    for ev in schedule:
        p = planes[ev.plane]
        if ev.time < p.target:
            total += p.early_rate * (p.target - ev.time)
        else:
            total += p.late_rate * (ev.time - p.target)
    return total


def planes_from_json(data) -> tuple:
    """``{"planes": [...], "separation": [[...]]}`` -> (planes, separation)."""
    try:
        planes = [
            PlaneSpec(int(p["earliest"]), int(p["target"]), int(p["latest"]),
                      int(p.get("earlyRate", 1)), int(p.get("lateRate", 1)), int(p.get("class", 0)))
            for p in data["planes"]
        ]
        classes = max(p.cls for p in planes) + 1
        sep = data.get("separation", [[0] * classes for _ in range(classes)])
        return planes, [[int(v) for v in row] for row in sep]
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"bad plane file: {e}") from None


# ---------------------------------------------------------------------------
# two-counter machines


@dataclass(frozen=True)
class Inc:
    counter: str
    next: int


@dataclass(frozen=True)
class Dec:
    counter: str
    next: int


@dataclass(frozen=True)
class IfZero:
    counter: str
    then: int
    orelse: int


@dataclass(frozen=True)
class Halt:
    pass


COUNTERS = ("c", "d")
# (holder, scratch) per counter, indexed by role parity
CLOCK_ROLES = {"c": (("x", "w"), ("w", "x")), "d": (("y", "v"), ("v", "y"))}
Z = "z"
HALT = "halt"


def check_program(prog: Sequence) -> None:
    if not prog or not isinstance(prog[-1], Halt):
        raise ModelError("the last instruction must be halt")
    n = len(prog)
    for i, ins in enumerate(prog):
        labels = []
        if isinstance(ins, (Inc, Dec)):
            labels = [ins.next]
        elif isinstance(ins, IfZero):
            labels = [ins.then, ins.orelse]
        elif not isinstance(ins, Halt):
            raise ModelError(f"instruction {i}: unknown instruction {ins!r}")
        if not isinstance(ins, Halt) and ins.counter not in COUNTERS:
            raise ModelError(f"instruction {i}: unknown counter {ins.counter!r}")
        for lab in labels:
            if not 0 <= lab < n:
                raise ModelError(f"instruction {i}: label {lab} out of range")


def parse_program(text: str) -> list:
    """One instruction per line: ``inc c 2``, ``dec d 4``, ``ifz c 3 5``, ``halt``; ``#`` comments."""
    prog = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op = parts[0].lower()
        try:
            if op == "inc" and len(parts) == 3:
                prog.append(Inc(parts[1], int(parts[2])))
            elif op == "dec" and len(parts) == 3:
                prog.append(Dec(parts[1], int(parts[2])))
            elif op == "ifz" and len(parts) == 4:
                prog.append(IfZero(parts[1], int(parts[2]), int(parts[3])))
            elif op == "halt" and len(parts) == 1:
                prog.append(Halt())
            else:
                raise ValueError
        except ValueError:
            raise ModelError(f"line {no}: cannot read instruction {line!r}") from None
    check_program(prog)
    return prog


def enc(n: int) -> Fraction:
    """Clock encoding of a counter value."""
    return 1 - Fraction(1, 2**n)


def _node(label: int, pc: int, pd: int, prog) -> str:
    if isinstance(prog[label], Halt):
        return HALT
    suffix = f"L{label}_{pc}{pd}"
    return suffix if isinstance(prog[label], IfZero) else f"{suffix}_l0"


def _flip(counter, pc, pd):
    return (1 - pc, pd) if counter == "c" else (pc, 1 - pd)


def _holder(counter, pc, pd):
    return CLOCK_ROLES[counter][pc if counter == "c" else pd]


def inc_price(holder: str):
    # zero exactly when the dwell is (1 - holder) / 2
    return ("pow", ("sub", 1, holder, ("mul", 2, "t")), 2)


def dec_price(holder: str):
    # zero exactly when the dwell is 2 * (1 - holder)
    return ("pow", ("sub", 1, holder, ("div", "t", 2)), 2)


def gen_two_counter(prog: Sequence, steps: Optional[int] = None) -> ModelDocument:
    """One priced automaton simulating ``prog``; only faithful runs cost 0.

    Counter ``c`` lives in whichever of ``x``/``w`` currently holds it (the
    other is scratch), ``d`` likewise in ``y``/``v``; every increment or
    decrement moves the value to the scratch clock, so each instruction
    exists once per role parity ``(pc, pd)``. Each module lasts exactly one
    time unit, measured by ``z``. Its first location pays a squared error
    that vanishes only for the dwell that moves the counter; the clock of the
    untouched counter is wrapped back to its value by ``y = 1`` reset loops.
    """
    prog = list(prog)
    check_program(prog)
    locs, edges = {}, []

    def add_loc(lid, inv=(), price=None):
        locs.setdefault(lid, m.Location(lid, tuple(inv), price or m.ConstantRate(0)))

    def wrap_loop(lid, clock):
        edges.append(m.Edge(lid, lid, (m.GuardAtom(clock, "=", 1),), (clock,)))

    add_loc(HALT)
    todo, done = [(0, 0, 0)], set()
    while todo:
        label, pc, pd = todo.pop()
        if (label, pc, pd) in done:
            continue
        done.add((label, pc, pd))
        ins = prog[label]
        if isinstance(ins, Halt):
            continue
        X, W = _holder(ins.counter, pc, pd)
        other = "d" if ins.counter == "c" else "c"
        Y, _ = _holder(other, pc, pd)
        if isinstance(ins, IfZero):
            here = _node(label, pc, pd, prog)
            add_loc(here, (m.GuardAtom(Z, "<=", 0),))
            edges.append(m.Edge(here, _node(ins.then, pc, pd, prog), (m.GuardAtom(X, "=", 0),)))
            edges.append(m.Edge(here, _node(ins.orelse, pc, pd, prog), (m.GuardAtom(X, ">", 0),)))
            todo += [(ins.then, pc, pd), (ins.orelse, pc, pd)]
            continue
        l0 = _node(label, pc, pd, prog)
        l1 = l0[:-1] + "1"
        npc, npd = _flip(ins.counter, pc, pd)
        price = inc_price(X) if isinstance(ins, Inc) else dec_price(X)
        add_loc(l0, (m.GuardAtom(Y, "<=", 1),), m.Polynomial(price))
        add_loc(l1, (m.GuardAtom(Y, "<=", 1),))
        first_resets = (W,) if isinstance(ins, Inc) else (X, W)
        edges.append(m.Edge(l0, l1, (m.GuardAtom(Z, ">", 0),), first_resets))
        wrap_loop(l0, Y)
        wrap_loop(l1, Y)
        if isinstance(ins, Inc):
            wrap_loop(l1, X)
        edges.append(m.Edge(l1, _node(ins.next, npc, npd, prog), (m.GuardAtom(Z, "=", 1),), (X, Z)))
        todo.append((ins.next, npc, npd))
    start = _node(0, 0, 0, prog)
    order = [start] + sorted(l for l in locs if l not in (start, HALT)) + [HALT]
    a = m.PricedAutomaton(
        "M", tuple(locs[l] for l in order if l in locs), tuple(edges), ("x", "w", "y", "v", Z), start,
    )
    net = m.Network((a,))
    if steps is None:
        try:
            steps = len(gadget_run(net, prog).steps)
        except (ModelError, RuntimeError):
            steps = 4 * len(prog) + 2
    q = m.Query((None,), (HALT,), steps, 0, "<=")
    return ModelDocument(net, (q,), {"generator": "two-counter", "instructions": str(len(prog))})


class _Builder:
    """Appends steps to a run while tracking the configuration."""

    def __init__(self, net):
        self.net = net
        self.conf = sem.initial_configuration(net)
        self.start = self.conf
        self.steps = []
        self.a = net.automata[0]

    def value(self, clock):
        return self.conf.nu[f"{self.a.name}.{clock}"]

    def fire(self, pred):
        for j, e in enumerate(self.a.edges):
            if e.source == self.conf.locs[0] and pred(e):
                try:
                    nxt = sem.step(self.net, self.conf, sem.Switch(0, j))
                except Exception:
                    continue
                self.steps.append(sem.Switch(0, j))
                self.conf = nxt
                return
        raise RuntimeError(f"no admissible edge out of {self.conf.locs[0]}")

    def _loop_on(self, clock):
        return lambda e: e.source == e.target and e.resets == (clock,)

    def wrap(self, clock):
        if self.value(clock) == 1:
            self.fire(self._loop_on(clock))

    def wait(self, dur, wrapped):
        """Delay ``dur``, resetting ``wrapped`` each time it reaches 1."""
        dur = Fraction(dur)
        while dur > 0:
            self.wrap(wrapped)
            chunk = min(dur, 1 - self.value(wrapped))
            self.steps.append(sem.Delay(chunk))
            self.conf = sem.step(self.net, self.conf, sem.Delay(chunk))
            dur -= chunk
        self.wrap(wrapped)


def correct_dwell(ins, holder_value: Fraction) -> Fraction:
    if isinstance(ins, Inc):
        return (1 - holder_value) / 2
    return 2 * (1 - holder_value)


def gadget_run(net: m.Network, prog: Sequence, l0_dwells: Optional[Sequence] = None, max_instructions: int = 1000) -> sem.Run:
    """Run simulating ``prog``; ``l0_dwells[i]`` overrides the i-th module's first dwell."""
    prog = list(prog)
    b = _Builder(net)
    label, pc, pd = 0, 0, 0
    k = 0
    for _ in range(max_instructions):
        ins = prog[label]
        if isinstance(ins, Halt):
            return sem.Run(b.start, tuple(b.steps))
        X, _ = _holder(ins.counter, pc, pd)
        other = "d" if ins.counter == "c" else "c"
        Y, _ = _holder(other, pc, pd)
        if isinstance(ins, IfZero):
            zero = b.value(X) == 0
            nxt = ins.then if zero else ins.orelse
            b.fire(lambda e: any(g.clock == X and (g.op == "=") == zero for g in e.guard))
            label = nxt
            continue
        t = correct_dwell(ins, b.value(X))
        if l0_dwells is not None and k < len(l0_dwells) and l0_dwells[k] is not None:
            t = Fraction(l0_dwells[k])
        k += 1
        b.wait(t, Y)
        b.fire(lambda e: e.source != e.target)
        b.wait(1 - t, Y)
        b.fire(lambda e: e.source != e.target)
        pc, pd = _flip(ins.counter, pc, pd)
        label = ins.next
    raise RuntimeError("program did not halt within the instruction limit")


def counter_values(net: m.Network, conf: sem.Configuration, pc: int, pd: int) -> tuple:
    """(c-encoding, d-encoding) read from the holder clocks."""
    a = net.automata[0].name
    return conf.nu[f"{a}.{CLOCK_ROLES['c'][pc][0]}"], conf.nu[f"{a}.{CLOCK_ROLES['d'][pd][0]}"]


def final_parity(prog: Sequence, max_instructions: int = 1000) -> tuple:
    """Role parity and counter values when the plain machine halts."""
    label, pc, pd, c, d = 0, 0, 0, 0, 0
    for _ in range(max_instructions):
        ins = prog[label]
        if isinstance(ins, Halt):
            return pc, pd, c, d
        if isinstance(ins, IfZero):
            v = c if ins.counter == "c" else d
            label = ins.then if v == 0 else ins.orelse
            continue
        delta = 1 if isinstance(ins, Inc) else -1
        if ins.counter == "c":
            c += delta
        else:
            d += delta
        if min(c, d) < 0:
            raise ModelError("decrement of a zero counter")
        pc, pd = _flip(ins.counter, pc, pd)
        label = ins.next
    raise RuntimeError("program did not halt within the instruction limit")
