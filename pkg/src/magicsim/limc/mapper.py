"""Cell allocation and micro-op emission for lowered expressions.

Every gate runs inside one column, so operands are produced where their
consumer lives. When a subexpression does not fit in the consumer's column
it is computed in another column and moved over by reading it and
re-initializing a cell with the read value (a late-bound ``Init``). Dead
cells go back on a per-column free list and are re-initialized on reuse.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..crossbar import ArrayGeometry, CellAddress
from ..magic import ExecNot, ExecOr, Init, Read, op_from_dict, op_to_dict
from .expr import Expr, Not, Or, Var, to_text, variables
from .lower import is_lowered


class MappingError(Exception):
    pass


class ScheduleError(Exception):
    def __init__(self, message: str, op_index: int | None = None):
        self.op_index = op_index
        prefix = f"op {op_index}: " if op_index is not None else ""
        super().__init__(prefix + message)


@dataclass
class Schedule:
    inputs: list[str]
    ops: list
    output_cell: CellAddress
    nets: dict[str, CellAddress] = field(default_factory=dict)
    expr: str | None = None

    def to_dict(self) -> dict:
        d = {
            "inputs": list(self.inputs),
            "output_cell": list(self.output_cell),
            "ops": [op_to_dict(op) for op in self.ops],
        }
        if self.expr is not None:
            d["expr"] = self.expr
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        return cls(list(d["inputs"]), [op_from_dict(o) for o in d["ops"]], CellAddress(*d["output_cell"]),
                   expr=d.get("expr"))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path) -> "Schedule":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def count(self, kind: str) -> int:
        return sum(op.kind == kind for op in self.ops)


class Allocation:
    """Per-column free lists; the lowest free row is handed out first."""

    def __init__(self, geometry: ArrayGeometry):
        self.geometry = geometry
        self.free = {c: list(range(geometry.rows)) for c in range(geometry.cols)}
        self.owner: dict[CellAddress, str] = {}

    def n_free(self, col: int) -> int:
        return len(self.free[col])

    def take(self, col: int, net: str) -> CellAddress:
        if not self.free[col]:
            raise MappingError(
                f"column {col} is full while placing net {net!r} "
                f"(live: {sorted(n for c, n in self.owner.items() if c.col == col)})"
            )
        row = self.free[col].pop(0)
        cell = CellAddress(row, col)
        self.owner[cell] = net
        return cell

    def release(self, cell: CellAddress) -> None:
        del self.owner[cell]
        self.free[cell.col].append(cell.row)
        self.free[cell.col].sort()


# gate tree: ("var", name) | ("not", child) | ("or", [children])


def _to_tree(e: Expr, max_fanin: int):
    if isinstance(e, Var):
        return ("var", e.name)
    if isinstance(e, Not):
        return ("not", _to_tree(e.e, max_fanin))
    if isinstance(e, Or):
        if max_fanin <= 2:
            return ("or", [_to_tree(e.a, max_fanin), _to_tree(e.b, max_fanin)])
        operands = []

        def gather(x):
            if isinstance(x, Or):
                gather(x.a)
                gather(x.b)
            else:
                operands.append(_to_tree(x, max_fanin))

        gather(e)
        while len(operands) > max_fanin:
            operands = [("or", operands[:max_fanin])] + operands[max_fanin:]
        return ("or", operands)
    raise MappingError(f"expression is not lowered to OR/NOT: {to_text(e)}")


def _need(node) -> int:
    """Cells a node occupies at its peak while being computed in one column."""
    kind = node[0]
    if kind == "var":
        return 1
    if kind == "not":
        child = node[1]
        return 3 if child[0] == "var" else max(_need(child), 3)
    children = node[1]
    inner = sorted((_need(c) for c in children if c[0] != "var"), reverse=True)
    peak = max((n + i for i, n in enumerate(inner)), default=0)
    return max(peak, len(children) + 1)


class _Emitter:
    def __init__(self, geometry: ArrayGeometry):
        self.alloc = Allocation(geometry)
        self.ops: list = []
        self.nets: dict[str, CellAddress] = {}
        self.counter = 0

    def new_net(self) -> str:
        name = f"n{self.counter}"
        self.counter += 1
        return name

    def load(self, name: str, col: int) -> CellAddress:
        cell = self.alloc.take(col, name)
        self.ops.append(Init(cell, name))
        return cell

    def place(self, node, col: int) -> CellAddress:
        """Compute a non-leaf ``node`` and leave its value in column ``col``."""
        need = _need(node)
        if need <= self.alloc.n_free(col):
            return self.emit(node, col)
        others = [c for c in range(self.alloc.geometry.cols) if c != col]
        if others:
            col2 = max(others, key=lambda c: (self.alloc.n_free(c), -c))
            if self.alloc.n_free(col2) > self.alloc.n_free(col) - 1:
                cell2 = self.emit(node, col2)
                net = self.alloc.owner[cell2]
                self.ops.append(Read(cell2, net))
                self.alloc.release(cell2)
                cell = self.alloc.take(col, net)
                self.ops.append(Init(cell, "@" + net))
                self.nets[net] = cell
                return cell
        return self.emit(node, col)

    def emit(self, node, col: int) -> CellAddress:
        kind = node[0]
        if kind == "var":
            return self.load(node[1], col)
        net = self.new_net()
        children = [node[1]] if kind == "not" else list(node[1])
        order = sorted((k for k, c in enumerate(children) if c[0] != "var"),
                       key=lambda k: -_need(children[k]))
        held = {k: self.place(children[k], col) for k in order}
        if kind == "not":
            helper = self.alloc.take(col, net + ".x1")
            self.ops.append(Init(helper, 1))
            x_in = held[0] if 0 in held else self.load(children[0][1], col)
            out = self.alloc.take(col, net)
            self.ops.append(Init(out, 0))
            self.ops.append(ExecNot(helper, x_in, out))
            operands = [helper, x_in]
        else:
            for k, c in enumerate(children):
                if k not in held:
                    held[k] = self.load(c[1], col)
            operands = [held[k] for k in range(len(children))]
            out = self.alloc.take(col, net)
            self.ops.append(Init(out, 0))
            self.ops.append(ExecOr(tuple(operands), out))
        for c in operands:
            self.alloc.release(c)
        self.nets[net] = out
        return out


def allocate_and_emit(e: Expr, inputs: list[str] | None = None, geometry: ArrayGeometry | None = None,
                      max_fanin: int = 2) -> Schedule:
    """Map a lowered expression onto the array as an executable micro-op schedule."""
    geometry = geometry or ArrayGeometry()
    if not is_lowered(e):
        raise MappingError(f"expression is not lowered to OR/NOT: {to_text(e)}")
    used = variables(e)
    inputs = list(inputs) if inputs is not None else used
    undeclared = [v for v in used if v not in inputs]
    if undeclared:
        raise MappingError(f"undeclared inputs {undeclared}")
    if max_fanin < 1:
        raise ValueError("max_fanin must be >= 1")
    em = _Emitter(geometry)
    tree = _to_tree(e, max_fanin)
    start = max(range(geometry.cols), key=lambda c: (em.alloc.n_free(c), -c))
    out = em.emit(tree, start)
    em.ops.append(Read(out))
    sched = Schedule(inputs, em.ops, out, em.nets, to_text(e))
    check_schedule(sched, geometry)
    return sched


def check_schedule(s: Schedule, geometry: ArrayGeometry | None = None) -> None:
    """Static well-formedness check; raises :class:`ScheduleError` on the first violation.

    Operands must have been written before use, every exec output must have
    been initialized to 0 since its last write, NOT helpers must hold a
    fresh 1, and late-bound inits must name a declared input or an earlier
    read.
    """
    geometry = geometry or ArrayGeometry()
    last: dict[CellAddress, object] = {}  # cell -> ("init", target) | "exec"
    read_nets: set[str] = set()
    for k, op in enumerate(s.ops):
        for c in op.cells:
            try:
                c.check(geometry)
            except IndexError as exc:
                raise ScheduleError(str(exc), k) from None
        if isinstance(op, Init):
            t = op.target
            if isinstance(t, str):
                if t.startswith("@"):
                    if t[1:] not in read_nets:
                        raise ScheduleError(f"init from unknown net {t!r}", k)
                elif t not in s.inputs:
                    raise ScheduleError(f"init from undeclared input {t!r}", k)
            elif t not in (0, 1) or isinstance(t, bool):
                raise ScheduleError(f"bad init target {t!r}", k)
            last[op.cell] = ("init", t)
        elif isinstance(op, (ExecOr, ExecNot)):
            cells = list(op.cells)
            if len({c.col for c in cells}) != 1 or len({c.row for c in cells}) != len(cells):
                raise ScheduleError("exec cells must share a column and use distinct rows", k)
            out = op.output if isinstance(op, ExecOr) else op.y_out
            ins = op.inputs if isinstance(op, ExecOr) else (op.x1, op.x_in)
            if out in ins:
                raise ScheduleError(f"{out.name} is both input and output", k)
            for c in ins:
                if c not in last:
                    raise ScheduleError(f"operand {c.name} used before it was written", k)
            if last.get(out) != ("init", 0):
                raise ScheduleError(f"output {out.name} not initialized to 0 before exec", k)
            if isinstance(op, ExecNot) and last.get(op.x1) != ("init", 1):
                raise ScheduleError(f"NOT helper {op.x1.name} not initialized to 1", k)
            last[out] = "exec"
        elif isinstance(op, Read):
            if op.cell not in last:
                raise ScheduleError(f"read of unwritten cell {op.cell.name}", k)
            if op.net is not None:
                read_nets.add(op.net)
        else:
            raise ScheduleError(f"unknown op {op!r}", k)
    if not s.ops or not isinstance(s.ops[-1], Read) or s.ops[-1].cell != s.output_cell:
        raise ScheduleError("schedule must end by reading the output cell")
