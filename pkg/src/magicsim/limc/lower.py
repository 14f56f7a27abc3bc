"""Lowering onto the functionally complete {OR, NOT} basis."""
from __future__ import annotations

from .expr import And, Expr, Not, Or, Var, Xor


def _neg(e: Expr) -> Expr:
    return e.e if isinstance(e, Not) else Not(e)


def lower_to_or_not(e: Expr) -> Expr:
    """De Morgan for AND, AND/OR/NOT expansion for XOR, double negations removed."""
    if isinstance(e, Var):
        return e
    if isinstance(e, Not):
        return _neg(lower_to_or_not(e.e))
    if isinstance(e, Or):
        return Or(lower_to_or_not(e.a), lower_to_or_not(e.b))
    if isinstance(e, And):
        return _neg(Or(_neg(lower_to_or_not(e.a)), _neg(lower_to_or_not(e.b))))
    if isinstance(e, Xor):
        return lower_to_or_not(And(Or(e.a, e.b), Not(And(e.a, e.b))))
    raise TypeError(f"not an expression: {e!r}")


def is_lowered(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Not):
        return is_lowered(e.e)
    if isinstance(e, Or):
        return is_lowered(e.a) and is_lowered(e.b)
    return False


def gate_counts(e: Expr) -> dict[str, int]:
    counts = {"or": 0, "not": 0}

    def walk(x):
        if isinstance(x, Not):
            counts["not"] += 1
            walk(x.e)
        elif isinstance(x, Or):
            counts["or"] += 1
            walk(x.a)
            walk(x.b)
        elif not isinstance(x, Var):
            raise TypeError("expression is not lowered")

    walk(e)
    return counts
