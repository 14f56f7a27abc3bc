"""Boolean expression trees, a reference evaluator and a printer."""
from __future__ import annotations

import re
from dataclasses import dataclass

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not _IDENT.fullmatch(self.name):
            raise ValueError(f"bad variable name {self.name!r}")


@dataclass(frozen=True)
class Not:
    e: "Expr"


@dataclass(frozen=True)
class Or:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class And:
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Xor:
    a: "Expr"
    b: "Expr"


Expr = Var | Not | Or | And | Xor

_PREC = {Or: 1, Xor: 2, And: 3, Not: 4, Var: 5}
_SYM = {Or: "|", Xor: "^", And: "&"}


class UnboundVariableError(KeyError):
    pass


def evaluate_expr(e: Expr, assignment) -> int:
    """Direct recursive evaluation; the ground truth for every equivalence check."""
    if isinstance(e, Var):
        try:
            return int(bool(assignment[e.name]))
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Not):
        return 1 - evaluate_expr(e.e, assignment)
    a, b = evaluate_expr(e.a, assignment), evaluate_expr(e.b, assignment)
    if isinstance(e, Or):
        return a | b
    if isinstance(e, And):
        return a & b
    if isinstance(e, Xor):
        return a ^ b
    raise TypeError(f"not an expression: {e!r}")


def variables(e: Expr) -> list[str]:
    """Variable names in first-occurrence order."""
    seen: dict[str, None] = {}

    def walk(x):
        if isinstance(x, Var):
            seen.setdefault(x.name)
        elif isinstance(x, Not):
            walk(x.e)
        else:
            walk(x.a)
            walk(x.b)

    walk(e)
    return list(seen)


def to_text(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Not):
        inner = to_text(e.e)
        return f"!({inner})" if _PREC[type(e.e)] < _PREC[Not] else f"!{inner}"
    p = _PREC[type(e)]
    left, right = to_text(e.a), to_text(e.b)
    if _PREC[type(e.a)] < p:
        left = f"({left})"
    if _PREC[type(e.b)] <= p:
        right = f"({right})"
    return f"{left} {_SYM[type(e)]} {right}"


def depth(e: Expr) -> int:
    if isinstance(e, Var):
        return 0
    if isinstance(e, Not):
        return 1 + depth(e.e)
    return 1 + max(depth(e.a), depth(e.b))
