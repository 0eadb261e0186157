"""The ``pta-1`` JSON model format.

Numbers are exact: JSON integers, or strings ``"num/den"``. Guards are lists
of ``[clock, op, bound]`` triples, sync labels are ``"c!"`` / ``"c?"``, and
price expressions are prefix s-expressions such as
``["pow", ["sub", 1, "x", ["div", "t", 2]], 2]``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

from . import expr as ex
from . import model as m
from .errors import ModelError, ParseError

FORMAT_VERSION = "pta-1"
SIGNED_PRICES_KEY = "signedPrices"

_RATIONAL = re.compile(r"^-?\d+(/\d+)?$")


class _FloatLiteral(str):
    pass


@dataclass(frozen=True)
class ModelDocument:
    network: m.Network
    queries: tuple = ()
    metadata: dict = field(default_factory=dict)
    version: str = FORMAT_VERSION

    @property
    def signed_prices(self) -> bool:
        return self.metadata.get(SIGNED_PRICES_KEY) == "true"

    def validate(self) -> list:
        return m.validate(self.network, self.queries, signed_prices=self.signed_prices)


# ---------------------------------------------------------------------------
# numbers


def parse_rational(v, path="$") -> Fraction:
    if isinstance(v, bool):
        raise ParseError("expected a number, got a boolean", path=path)
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, _FloatLiteral):
        raise ParseError(f"floating-point literal {v}; write integers or \"num/den\" strings", path=path)
    if isinstance(v, str) and _RATIONAL.match(v.strip()):
        try:
            return Fraction(v.strip())
        except ZeroDivisionError:
            raise ParseError(f"zero denominator in {v!r}", path=path) from None
    raise ParseError(f"expected an exact rational, got {v!r}", path=path)


def format_rational(q):
    """Integers stay JSON integers; everything else becomes ``"num/den"``."""
    q = Fraction(q)
    if q.denominator == 1:
        return q.numerator
    return f"{q.numerator}/{q.denominator}"


def _int(v, path) -> int:
    q = parse_rational(v, path)
    if q.denominator != 1:
        raise ParseError(f"expected an integer, got {v!r}", path=path)
    return int(q)


def _get(obj, key, path, default=None, required=False):
    if not isinstance(obj, dict):
        raise ParseError("expected an object", path=path)
    if key not in obj:
        if required:
            raise ParseError(f"missing key {key!r}", path=path)
        return default
    return obj[key]


def _list(v, path):
    if not isinstance(v, list):
        raise ParseError("expected an array", path=path)
    return v


# ---------------------------------------------------------------------------
# expressions


def expr_from_json(v, path="$"):
    if isinstance(v, bool):
        raise ParseError("boolean in expression", path=path)
    if isinstance(v, (int, _FloatLiteral)):
        return _const(parse_rational(v, path))
    if isinstance(v, str):
        if _RATIONAL.match(v.strip()):
            return _const(parse_rational(v, path))
        return v
    if isinstance(v, list) and v and isinstance(v[0], str):
        op = v[0]
        if op in ("pow",) and len(v) == 3:
            return (op, expr_from_json(v[1], f"{path}[1]"), _int(v[2], f"{path}[2]"))
        out = (op,) + tuple(expr_from_json(a, f"{path}[{i + 1}]") for i, a in enumerate(v[1:]))
        try:
            ex.check(out)
        except ModelError as e:
            raise ParseError(str(e), path=path) from None
        return out
    raise ParseError(f"malformed expression {v!r}", path=path)


def _const(q: Fraction):
    return int(q) if q.denominator == 1 else q


def expr_to_json(e):
    if isinstance(e, str):
        return e
    if isinstance(e, tuple):
        return [e[0]] + [expr_to_json(a) for a in e[1:]]
    return format_rational(e)


# ---------------------------------------------------------------------------
# model pieces


def _guard(v, path) -> tuple:
    if v is None:
        return ()
    atoms = []
    for k, a in enumerate(_list(v, path)):
        p = f"{path}[{k}]"
        if not isinstance(a, list) or len(a) != 3 or not isinstance(a[0], str):
            raise ParseError("guard atom must be [clock, op, bound]", path=p)
        op = {"==": "=", "≤": "<=", "≥": ">="}.get(a[1], a[1])
        if op not in m.OPS:
            raise ParseError(f"unknown guard operator {a[1]!r}", path=p)
        atoms.append(m.GuardAtom(a[0], op, _int(a[2], f"{p}[2]")))
    return tuple(atoms)


def _guard_json(g) -> list:
    return [[a.clock, a.op, a.bound] for a in g]


def price_from_json(v, path="$"):
    if v is None:
        return m.ConstantRate(0)
    kind = _get(v, "kind", path, required=True)
    try:
        if kind == "constant":
            return m.ConstantRate(_int(_get(v, "rate", path, required=True), f"{path}.rate"))
        if kind == "piecewise":
            pts = [parse_rational(x, f"{path}.points[{i}]") for i, x in enumerate(_list(_get(v, "points", path, required=True), f"{path}.points"))]
            vals = [parse_rational(x, f"{path}.values[{i}]") for i, x in enumerate(_list(_get(v, "values", path, required=True), f"{path}.values"))]
            pieces = []
            for i, pc in enumerate(_list(_get(v, "pieces", path, required=True), f"{path}.pieces")):
                if not isinstance(pc, list) or len(pc) != 2:
                    raise ParseError("piece must be [slope, intercept]", path=f"{path}.pieces[{i}]")
                pieces.append((parse_rational(pc[0], f"{path}.pieces[{i}][0]"), parse_rational(pc[1], f"{path}.pieces[{i}][1]")))
            integral = _get(v, "integral", path)
            return m.Piecewise(m.PwlStructure.make(pts, vals, pieces, integral))
        if kind == "polynomial":
            return m.Polynomial(expr_from_json(_get(v, "expr", path, required=True), f"{path}.expr"))
        if kind == "lipschitz":
            return m.Lipschitz(
                expr_from_json(_get(v, "expr", path, required=True), f"{path}.expr"),
                parse_rational(_get(v, "K", path, required=True), f"{path}.K"),
                parse_rational(_get(v, "T", path, required=True), f"{path}.T"),
            )
    except ParseError:
        raise
    except ModelError as e:
        raise ParseError(str(e), path=path) from None
    raise ParseError(f"unknown price kind {kind!r}", path=f"{path}.kind")


def price_to_json(p) -> dict:
    if isinstance(p, m.ConstantRate):
        return {"kind": "constant", "rate": p.rate}
    if isinstance(p, m.Piecewise):
        s = p.structure
        return {
            "kind": "piecewise",
            "points": [format_rational(x) for x in s.points],
            "values": [format_rational(x) for x in s.values],
            "pieces": [[format_rational(a), format_rational(b)] for a, b in s.pieces],
            "integral": s.integral,
        }
    if isinstance(p, m.Polynomial):
        return {"kind": "polynomial", "expr": expr_to_json(p.expr)}
    if isinstance(p, m.Lipschitz):
        return {"kind": "lipschitz", "expr": expr_to_json(p.expr), "K": format_rational(p.K), "T": format_rational(p.T)}
    raise ModelError(f"unknown price kind {type(p).__name__}")


def _sync(v, path):
    if v is None:
        return None
    if not isinstance(v, str) or len(v) < 2 or v[-1] not in "!?":
        raise ParseError(f"sync must look like \"c!\" or \"c?\", got {v!r}", path=path)
    return (v[:-1], v[-1])


def _automaton(v, path) -> m.PricedAutomaton:
    name = _get(v, "name", path, required=True)
    if not isinstance(name, str):
        raise ParseError("automaton name must be a string", path=f"{path}.name")
    clocks = tuple(_list(_get(v, "clocks", path, default=[]), f"{path}.clocks"))
    locs = []
    for j, lv in enumerate(_list(_get(v, "locations", path, required=True), f"{path}.locations")):
        lp = f"{path}.locations[{j}]"
        locs.append(m.Location(
            id=_get(lv, "id", lp, required=True),
            invariant=_guard(_get(lv, "invariant", lp), f"{lp}.invariant"),
            price=price_from_json(_get(lv, "price", lp), f"{lp}.price"),
        ))
    edges = []
    for j, evj in enumerate(_list(_get(v, "edges", path, default=[]), f"{path}.edges")):
        ep = f"{path}.edges[{j}]"
        edges.append(m.Edge(
            source=_get(evj, "from", ep, required=True),
            target=_get(evj, "to", ep, required=True),
            guard=_guard(_get(evj, "guard", ep), f"{ep}.guard"),
            resets=tuple(_list(_get(evj, "resets", ep, default=[]), f"{ep}.resets")),
            sync=_sync(_get(evj, "sync", ep), f"{ep}.sync"),
            price=_int(_get(evj, "price", ep, default=0), f"{ep}.price"),
        ))
    return m.PricedAutomaton(name, tuple(locs), tuple(edges), clocks, _get(v, "initial", path))


def _automaton_json(a: m.PricedAutomaton) -> dict:
    out = {"name": a.name, "clocks": list(a.clocks), "locations": [], "edges": []}
    for loc in a.locations:
        lj = {"id": loc.id}
        if loc.invariant:
            lj["invariant"] = _guard_json(loc.invariant)
        lj["price"] = price_to_json(loc.price)
        out["locations"].append(lj)
    for e in a.edges:
        ej = {"from": e.source, "to": e.target}
        if e.guard:
            ej["guard"] = _guard_json(e.guard)
        if e.resets:
            ej["resets"] = list(e.resets)
        if e.sync:
            ej["sync"] = e.sync[0] + e.sync[1]
        if e.price:
            ej["price"] = e.price
        out["edges"].append(ej)
    if a.initial is not None:
        out["initial"] = a.initial
    return out


def selection_from_json(v, net: m.Network, path) -> tuple:
    """``{"A": "l0", ...}`` -> one entry per automaton (missing = None)."""
    if v is None:
        return (None,) * len(net.automata)
    if isinstance(v, str) and len(net.automata) == 1:
        return (v,)
    if not isinstance(v, dict):
        raise ParseError("location selection must map automaton names to locations", path=path)
    names = [a.name for a in net.automata]
    for k in v:
        if k not in names:
            raise ParseError(f"unknown automaton {k!r}", path=path)
    return tuple(v.get(n) for n in names)


def selection_to_json(sel, net: m.Network) -> dict:
    return {a.name: lid for a, lid in zip(net.automata, sel) if lid is not None}


def query_from_json(v, net, path) -> m.Query:
    try:
        return m.Query(
            source=selection_from_json(_get(v, "source", path), net, f"{path}.source"),
            target=selection_from_json(_get(v, "target", path), net, f"{path}.target"),
            steps=_int(_get(v, "steps", path, required=True), f"{path}.steps"),
            budget=parse_rational(_get(v, "budget", path, default=0), f"{path}.budget"),
            comparator=_get(v, "comparator", path, default="<="),
        )
    except ParseError:
        raise
    except ModelError as e:
        raise ParseError(str(e), path=path) from None


def query_to_json(q: m.Query, net) -> dict:
    return {
        "source": selection_to_json(q.source, net),
        "target": selection_to_json(q.target, net),
        "steps": q.steps,
        "budget": format_rational(q.budget),
        "comparator": q.comparator,
    }


# ---------------------------------------------------------------------------
# documents


def load_json(text: str):
    try:
        return json.loads(text, parse_float=_FloatLiteral)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None


def document_from_json(data, *, check=True) -> ModelDocument:
    version = _get(data, "version", "$", required=True)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version!r} (expected {FORMAT_VERSION!r})", path="$.version")
    automata = tuple(_automaton(a, f"$.automata[{i}]") for i, a in enumerate(_list(_get(data, "automata", "$", required=True), "$.automata")))
    net = m.Network(
        automata,
        tuple(_list(_get(data, "channels", "$", default=[]), "$.channels")),
        tuple(_list(_get(data, "globalClocks", "$", default=[]), "$.globalClocks")),
    )
    queries = tuple(query_from_json(q, net, f"$.queries[{i}]") for i, q in enumerate(_list(_get(data, "queries", "$", default=[]), "$.queries")))
    meta = _get(data, "metadata", "$", default={})
    if not isinstance(meta, dict) or not all(isinstance(x, str) for x in meta.values()):
        raise ParseError("metadata must map strings to strings", path="$.metadata")
    doc = ModelDocument(net, queries, dict(meta), version)
    if check:
        diags = doc.validate()
        if diags:
            d = diags[0]
            raise ParseError(f"{d.message} ({len(diags)} problem(s))", path="$." + d.path)
    return doc


def parse_model(text: str, *, check=True) -> ModelDocument:
    """Parse and validate a ``pta-1`` document."""
    return document_from_json(load_json(text), check=check)


def document_to_json(doc: ModelDocument) -> dict:
    net = doc.network
    out = {"version": doc.version, "automata": [_automaton_json(a) for a in net.automata]}
    if net.global_clocks:
        out["globalClocks"] = list(net.global_clocks)
    if net.channels:
        out["channels"] = list(net.channels)
    if doc.queries:
        out["queries"] = [query_to_json(q, net) for q in doc.queries]
    if doc.metadata:
        out["metadata"] = dict(doc.metadata)
    return out


def serialize_model(doc: ModelDocument) -> str:
    return json.dumps(document_to_json(doc), indent=2, ensure_ascii=False) + "\n"


def load_model(path, *, check=True) -> ModelDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), check=check)


def save_model(doc: ModelDocument, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_model(doc))
