"""Polynomial price expressions.

An expression is a plain nested-tuple tree:

* an ``int`` or ``Fraction`` constant,
* a ``str`` naming a variable (a clock of the owning automaton, or ``"t"`` for
  the dwell time of the current delay),
* ``(op, *args)`` with ``op`` one of ``add``, ``sub``, ``mul``, ``div``,
  ``pow``, ``neg``.

``div`` only divides by a non-zero constant and ``pow`` only raises to a
natural constant, so every expression is a polynomial with rational
coefficients and evaluates exactly under :class:`fractions.Fraction`.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Mapping, Union

from .errors import ModelError

Expr = Union[int, Fraction, str, tuple]

DWELL = "t"

_NARY = {"add", "sub", "mul"}
OPS = _NARY | {"div", "pow", "neg"}


def is_const(e) -> bool:
    return isinstance(e, Rational) and not isinstance(e, bool)


def check(e: Expr, path: str = "expr") -> None:
    """Raise :class:`ModelError` if ``e`` is not a well-formed expression."""
    if is_const(e) or isinstance(e, str):
        if isinstance(e, str) and not e:
            raise ModelError(f"{path}: empty variable name")
        return
    if not isinstance(e, tuple) or not e:
        raise ModelError(f"{path}: malformed expression {e!r}")
    op, args = e[0], e[1:]
    if op not in OPS:
        raise ModelError(f"{path}: unknown operator {op!r}")
    if op in _NARY and len(args) < 1:
        raise ModelError(f"{path}: {op} needs at least one argument")
    if op == "neg" and len(args) != 1:
        raise ModelError(f"{path}: neg takes one argument")
    if op == "div":
        if len(args) != 2 or not is_const(args[1]) or args[1] == 0:
            raise ModelError(f"{path}: div needs a non-zero constant divisor")
    if op == "pow":
        if len(args) != 2 or not isinstance(args[1], int) or args[1] < 0:
            raise ModelError(f"{path}: pow needs a natural exponent")
    for i, a in enumerate(args):
        check(a, f"{path}[{i + 1}]")


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, str):
        return frozenset([e])
    if isinstance(e, tuple):
        out = frozenset()
        for a in e[1:]:
            out |= free_vars(a)
        return out
    return frozenset()


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e``; exact when ``env`` holds Fractions, float otherwise."""
    if isinstance(e, str):
        try:
            return env[e]
        except KeyError:
            raise ModelError(f"unbound variable {e!r} in price expression") from None
    if not isinstance(e, tuple):
        return Fraction(e)
    op, args = e[0], e[1:]
    if op == "pow":
        return evaluate(args[0], env) ** args[1]
    if op == "div":
        return evaluate(args[0], env) / Fraction(args[1])
    vals = [evaluate(a, env) for a in args]
    if op == "neg":
        return -vals[0]
    if op == "add":
        return sum(vals[1:], vals[0])
    if op == "sub":
        if len(vals) == 1:
            return -vals[0]
        out = vals[0]
        for v in vals[1:]:
            out = out - v
        return out
    if op == "mul":
        out = vals[0]
        for v in vals[1:]:
            out = out * v
        return out
    raise ModelError(f"unknown operator {op!r}")


def degree(e: Expr, var: str | None = None) -> int:
    """Total degree of ``e`` (or degree in ``var``), as an upper bound."""
    if isinstance(e, str):
        return 1 if var is None or e == var else 0
    if not isinstance(e, tuple):
        return 0
    op, args = e[0], e[1:]
    if op == "pow":
        return degree(args[0], var) * args[1]
    if op == "mul":
        return sum(degree(a, var) for a in args)
    if op == "div":
        return degree(args[0], var)
    return max(degree(a, var) for a in args)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Rename or replace variables."""
    if isinstance(e, str):
        return mapping.get(e, e)
    if isinstance(e, tuple):
        op = e[0]
        if op in ("pow", "div"):
            return (op, substitute(e[1], mapping), e[2])
        return (op,) + tuple(substitute(a, mapping) for a in e[1:])
    return e


def smt_number(q) -> str:
    """SMT-LIB2 real literal for a rational."""
    q = Fraction(q)
    if q < 0:
        return f"(- {smt_number(-q)})"
    if q.denominator == 1:
        return str(q.numerator)
    return f"(/ {q.numerator} {q.denominator})"


def to_smt(e: Expr, terms: Mapping[str, str]) -> str:
    """Render ``e`` as an SMT-LIB2 term; ``terms`` maps variable names to terms.

    Powers are expanded to products so the result stays inside QF_NRA.
    """
    if isinstance(e, str):
        try:
            return terms[e]
        except KeyError:
            raise ModelError(f"unbound variable {e!r} in price expression") from None
    if not isinstance(e, tuple):
        return smt_number(e)
    op, args = e[0], e[1:]
    if op == "pow":
        n = args[1]
        if n == 0:
            return "1"
        base = to_smt(args[0], terms)
        return base if n == 1 else "(* " + " ".join([base] * n) + ")"
    if op == "div":
        return f"(/ {to_smt(args[0], terms)} {smt_number(args[1])})"
    parts = [to_smt(a, terms) for a in args]
    sym = {"add": "+", "sub": "-", "mul": "*", "neg": "-"}[op]
    if len(parts) == 1 and op in ("add", "mul"):
        return parts[0]
    return f"({sym} {' '.join(parts)})"
