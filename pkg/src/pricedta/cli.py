"""Command-line entry point. Machine-readable JSON goes to stdout, notes to stderr.

Exit codes: 0 success, 1 invalid input or inadmissible run, 2 solver failure,
3 decoded witness does not replay.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import encode as en
from . import gens
from . import lipschitz as lp
from . import model as m
from . import oracle as orc
from . import parser as ps
from . import pwl2lpta as tr
from . import semantics as sem
from . import solve
from .errors import DecodeIntegrityError, PtaError, SolverError

EXIT_INVALID, EXIT_SOLVER, EXIT_INTEGRITY = 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read(path) -> tuple:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    return data.decode("utf-8"), _sha(data)


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _load(path, check=True) -> tuple:
    text, digest = _read(path)
    return ps.parse_model(text, check=check), digest


def selection(text, net: m.Network) -> tuple:
    """``"A=l0,B=m1"`` or, for one automaton, a bare ``"l0"``."""
    if text is None:
        return (None,) * len(net.automata)
    if "=" not in text:
        if len(net.automata) != 1:
            raise CliError("name a location per automaton: A=l0,B=m0")
        return (text.strip(),)
    sel = {}
    for part in text.split(","):
        name, _, loc = part.partition("=")
        sel[name.strip()] = loc.strip()
    return ps.selection_from_json(sel, net, "--from/--to")


def _query(doc, index) -> m.Query:
    if not doc.queries:
        raise CliError("model has no queries")
    if not 0 <= index < len(doc.queries):
        raise CliError(f"query index {index} out of range (model has {len(doc.queries)})")
    return doc.queries[index]


def _solver(args) -> solve.SolverConfig:
    return solve.SolverConfig(executable=args.solver or "", timeout=args.timeout)


def _write(path, text) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot write {path}: {e.strerror}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    text, digest = _read(args.model)
    try:
        doc = ps.parse_model(text, check=False)
        diags = [{"path": d.path, "message": d.message} for d in doc.validate()]
    except PtaError as e:
        diags = [{"path": "$", "message": str(e)}]
    _emit({"input": args.model, "inputSha256": digest, "valid": not diags, "diagnostics": diags})
    return 0 if not diags else EXIT_INVALID


def cmd_simulate(args):
    doc, digest = _load(args.model)
    run_text, run_digest = _read(args.run)
    run = sem.run_from_json(doc.network, ps.load_json(run_text))
    final, cost = sem.replay(doc.network, run)
    _emit({
        "input": args.model, "inputSha256": digest, "runSha256": run_digest,
        "cost": ps.format_rational(cost),
        "final": sem.configuration_to_json(doc.network, final),
    })
    return 0


def cmd_transform(args):
    doc, digest = _load(args.model)
    net_b, tmap = tr.transform(doc.network)
    meta = {"source": Path(args.model).name, "sourceSha256": digest}
    if tr.has_signed_prices(net_b):
        meta[ps.SIGNED_PRICES_KEY] = "true"
    out = ps.ModelDocument(net_b, (), meta)
    _write(args.output, ps.serialize_model(out))
    map_path = str(args.output) + ".map.json" if not str(args.output).endswith(".json") else str(args.output)[:-5] + ".map.json"
    _write(map_path, json.dumps(tmap.to_json(), indent=2) + "\n")
    _emit({"input": args.model, "inputSha256": digest, "model": str(args.output), "map": map_path,
           "locations": len(net_b.automata[0].locations), "edges": len(net_b.automata[0].edges),
           "signedPrices": tr.has_signed_prices(net_b)})
    return 0


def cmd_sandwich(args):
    doc, digest = _load(args.model)
    K, T = lp.lipschitz_bound(doc.network)
    cfg = lp.ApproxConfig.for_epsilon(args.epsilon, K, T, args.steps)
    low, high = lp.build_bounding_automata(doc.network, cfg)
    lo_path, hi_path = args.output
    for net, path, side in ((low, lo_path, "lower"), (high, hi_path, "upper")):
        meta = dict(doc.metadata, bound=side, epsilon=str(cfg.epsilon), delta=str(cfg.delta))
        _write(path, ps.serialize_model(ps.ModelDocument(net, doc.queries, meta)))
    _emit({"input": args.model, "inputSha256": digest, "lower": lo_path, "upper": hi_path,
           "K": ps.format_rational(K), "T": ps.format_rational(T), "delta": ps.format_rational(cfg.delta),
           "epsilon": ps.format_rational(cfg.epsilon)})
    return 0


def _steps(args, q):
    return q.steps if args.N is None else args.N


def cmd_encode(args):
    doc, digest = _load(args.model)
    q = _query(doc, args.query)
    inst = en.build_instance(doc.network, q, _steps(args, q))
    _write(args.output, inst.script)
    _emit({"input": args.model, "inputSha256": digest, "script": args.output, "logic": inst.logic,
           "steps": inst.steps, "scriptSha256": _sha(inst.script.encode("utf-8"))})
    return 0


def cmd_check(args):
    doc, digest = _load(args.model)
    q = _query(doc, args.query)
    d = solve.decide(doc.network, q, _solver(args), _steps(args, q))
    out = {"input": args.model, "inputSha256": digest, "verdict": d.status.value,
           "solverTimeSeconds": round(d.elapsed, 3)}
    if d.witness is not None:
        out["cost"] = ps.format_rational(d.cost)
        out["witness"] = sem.run_to_json(doc.network, d.witness)
    _emit(out)
    return 0


def _endpoints(args, doc):
    net = doc.network
    q = doc.queries[args.query] if doc.queries and args.query is not None and args.query < len(doc.queries) else None
    src = selection(args.source, net) if args.source else (q.source if q else (None,) * len(net.automata))
    if args.target:
        tgt = selection(args.target, net)
    elif q is not None:
        tgt = q.target
    else:
        raise CliError("give --to or a model query")
    n = args.N if args.N is not None else (q.steps if q else None)
    if n is None:
        raise CliError("give -N or a model query")
    return src, tgt, n


def cmd_optimize(args):
    doc, digest = _load(args.model)
    src, tgt, n = _endpoints(args, doc)
    r = solve.minimize(doc.network, src, tgt, n, _solver(args), lo=args.lo, hi=args.hi, gamma=args.gamma)
    out = {"input": args.model, "inputSha256": digest}
    out.update(solve.result_to_json(doc.network, r))
    _emit(out)
    return 0


def cmd_oracle(args):
    doc, digest = _load(args.model)
    src, tgt, n = _endpoints(args, doc)
    r = orc.opt_cost_exhaustive(doc.network, src, tgt, n, args.max_const)
    _emit({"input": args.model, "inputSha256": digest, "reachable": r.reachable,
           "optimum": None if r.cost is None else ps.format_rational(r.cost),
           "run": None if r.run is None else sem.run_to_json(doc.network, r.run)})
    return 0


def cmd_gen_alp(args):
    text, digest = _read(args.planes)
    planes, sep = gens.planes_from_json(ps.load_json(text))
    doc = gens.gen_alp(planes, args.runways, sep, args.budget, args.N)
    _write(args.output, ps.serialize_model(doc))
    _emit({"input": args.planes, "inputSha256": digest, "model": args.output,
           "automata": len(doc.network.automata), "steps": doc.queries[0].steps})
    return 0


def cmd_gen_2cm(args):
    text, digest = _read(args.program)
    prog = gens.parse_program(text)
    doc = gens.gen_two_counter(prog, args.N)
    _write(args.output, ps.serialize_model(doc))
    _emit({"input": args.program, "inputSha256": digest, "model": args.output,
           "locations": len(doc.network.automata[0].locations), "steps": doc.queries[0].steps})
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pricedta", description="Priced timed automata: validation, transforms, SMT-based cost queries.")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--solver", help="SMT-LIB2 solver executable (default: $PTA_SOLVER or z3)")
        sp.add_argument("--timeout", type=float, default=60.0, help="seconds per solver call")

    def endpoint_flags(sp):
        sp.add_argument("--from", dest="source", help="source locations, A=l0,B=m0 (default: initial)")
        sp.add_argument("--to", dest="target", help="target locations, A=l1 (missing automata: any)")
        sp.add_argument("-N", type=int, help="step bound")
        sp.add_argument("--query", type=int, default=0, help="model query supplying defaults")

    sp = sub.add_parser("validate", help="check a model file")
    sp.add_argument("model")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="replay a run descriptor")
    sp.add_argument("model")
    sp.add_argument("run")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("transform", help="piecewise-linear prices to linear rates")
    sp.add_argument("model")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("sandwich", help="lower/upper piecewise bounds of Lipschitz prices")
    sp.add_argument("model")
    sp.add_argument("--epsilon", type=_rational, required=True)
    sp.add_argument("--steps", type=_rational, required=True, help="number of delays D the error is spread over")
    sp.add_argument("-o", "--output", nargs=2, required=True, metavar=("LOWER", "UPPER"))
    sp.set_defaults(func=cmd_sandwich)

    sp = sub.add_parser("encode", help="write the SMT-LIB2 script of a query")
    sp.add_argument("model")
    sp.add_argument("--query", type=int, default=0)
    sp.add_argument("-N", type=int)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("check", help="decide a query with the solver")
    sp.add_argument("model")
    sp.add_argument("--query", type=int, default=0)
    sp.add_argument("-N", type=int)
    solver_flags(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("optimize", help="bracket the optimal cost by binary search")
    sp.add_argument("model")
    endpoint_flags(sp)
    sp.add_argument("--lo", type=_rational, default=Fraction(0))
    sp.add_argument("--hi", type=_rational)
    sp.add_argument("--gamma", type=_rational, default=Fraction(1, 1000))
    solver_flags(sp)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("oracle", help="exhaustive optimum for closed-guard constant-rate models")
    sp.add_argument("model")
    endpoint_flags(sp)
    sp.add_argument("--max-const", type=int)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("gen-alp", help="airport landing model")
    sp.add_argument("--planes", required=True, help='JSON {"planes": [...], "separation": [[...]]}')
    sp.add_argument("--runways", type=int, default=1)
    sp.add_argument("--budget", type=_rational, default=Fraction(gens.ALP_BUDGET))
    sp.add_argument("-N", type=int)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_gen_alp)

    sp = sub.add_parser("gen-2cm", help="two-counter machine gadget model")
    sp.add_argument("program")
    sp.add_argument("-N", type=int)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_gen_2cm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        _note(f"error: {e}")
        return e.code
    except DecodeIntegrityError as e:
        _note(f"integrity error: {e}")
        return EXIT_INTEGRITY
    except SolverError as e:
        _note(f"solver error: {e}")
        return EXIT_SOLVER
    except PtaError as e:
        _note(f"error: {e}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
