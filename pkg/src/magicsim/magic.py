"""MAGIC voltage protocols, gate runners and truth-table / calibration harnesses.

Execution drives arrive on the input rows' source lines; the shared bit line
floats and acts as the summing node, and the output row's source line is
grounded. Inputs and the output of a gate therefore sit in one column.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .crossbar import (
    FLOATING,
    GROUNDED,
    ArrayGeometry,
    CellAddress,
    CrossbarState,
    ExecutionTrace,
    LineDrive,
    Waveform,
    build_array,
    run_transient,
    solve_instant,
)
from .device import DeviceParams, TransistorParams, VariabilitySpec, reset_margin


class ProtocolError(Exception):
    """A gate or init was asked to run on cells that break its contract."""


class CalibrationError(Exception):
    pass


@dataclass(frozen=True)
class Protocols:
    """Voltages and timing for every operation. ``dt=None`` means ``duration / steps``."""

    set_v: float = 1.8
    set_gate_v: float = 1.6
    set_duration: float = 3.6e-3
    reset_v: float = 2.0
    reset_gate_v: float = 5.0
    reset_duration: float = 4e-3
    read_v: float = 0.5
    read_gate_v: float = 3.3
    read_duration: float = 0.6e-6
    or_v: float = 3.3
    not_v: float = 1.5
    not_input_ratio: float = 1 / 3
    exec_gate_v: float = 3.3
    exec_duration: float = 4e-3
    steps: int = 2000
    dt: float | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    def step_for(self, duration: float) -> float:
        return self.dt if self.dt is not None else duration / self.steps


DEFAULT = Protocols()


@dataclass
class ProtocolSpec:
    name: str
    drives: dict[str, LineDrive]
    duration: float
    dt: float
    roles: dict[str, CellAddress] = field(default_factory=dict)


# ---------------------------------------------------------------- micro-ops


@dataclass(frozen=True)
class Init:
    cell: CellAddress
    target: int | str  # 0, 1, an input name, or "@net" bound from an earlier Read

    kind = "init"

    @property
    def cells(self):
        return (self.cell,)


@dataclass(frozen=True)
class ExecOr:
    inputs: tuple[CellAddress, ...]
    output: CellAddress

    kind = "exec_or"

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("ExecOr needs at least one input")

    @property
    def cells(self):
        return (*self.inputs, self.output)


@dataclass(frozen=True)
class ExecNot:
    x1: CellAddress
    x_in: CellAddress
    y_out: CellAddress

    kind = "exec_not"

    @property
    def cells(self):
        return (self.x1, self.x_in, self.y_out)


@dataclass(frozen=True)
class Read:
    cell: CellAddress
    net: str | None = None

    kind = "read"

    @property
    def cells(self):
        return (self.cell,)


MicroOp = Init | ExecOr | ExecNot | Read


def op_to_dict(op: MicroOp) -> dict:
    d = {"kind": op.kind, "cells": [list(c) for c in op.cells]}
    if isinstance(op, Init):
        d["target"] = op.target
    elif isinstance(op, Read) and op.net is not None:
        d["target"] = op.net
    return d


def op_from_dict(d: dict) -> MicroOp:
    cells = [CellAddress(*c) for c in d["cells"]]
    kind = d["kind"]
    if kind == "init":
        return Init(cells[0], d["target"])
    if kind == "exec_or":
        return ExecOr(tuple(cells[:-1]), cells[-1])
    if kind == "exec_not":
        return ExecNot(*cells)
    if kind == "read":
        return Read(cells[0], d.get("target"))
    raise ValueError(f"unknown op kind {kind!r}")


# ---------------------------------------------------------------- protocols


def _spec(name, drives, duration, proto, roles):
    return ProtocolSpec(name, drives, duration, proto.step_for(duration), roles)


def protocol_set(cell, proto: Protocols = DEFAULT) -> ProtocolSpec:
    c = CellAddress(*cell)
    d = proto.set_duration
    drives = {
        c.bl: LineDrive.driven(Waveform.triangle(proto.set_v, d)),
        c.wl: LineDrive.driven(Waveform.dc(proto.set_gate_v, d)),
        c.sl: GROUNDED,
    }
    return _spec("set", drives, d, proto, {"cell": c})


def protocol_reset(cell, proto: Protocols = DEFAULT) -> ProtocolSpec:
    c = CellAddress(*cell)
    d = proto.reset_duration
    drives = {
        c.sl: LineDrive.driven(Waveform.triangle(proto.reset_v, d)),
        c.wl: LineDrive.driven(Waveform.dc(proto.reset_gate_v, d)),
        c.bl: GROUNDED,
    }
    return _spec("reset", drives, d, proto, {"cell": c})


def protocol_read(cell, proto: Protocols = DEFAULT) -> ProtocolSpec:
    c = CellAddress(*cell)
    d = proto.read_duration
    drives = {
        c.bl: LineDrive.driven(Waveform.dc(proto.read_v, d)),
        c.wl: LineDrive.driven(Waveform.dc(proto.read_gate_v, d)),
        c.sl: GROUNDED,
    }
    return _spec("read", drives, d, proto, {"cell": c})


def _column_check(cells: list[CellAddress], geometry: ArrayGeometry) -> int:
    for c in cells:
        c.check(geometry)
    if len({c.col for c in cells}) != 1:
        raise ProtocolError(f"gate cells must share one column: {[tuple(c) for c in cells]}")
    if len({c.row for c in cells}) != len(cells):
        raise ProtocolError(f"gate cells must occupy distinct rows: {[tuple(c) for c in cells]}")
    return cells[0].col


def protocol_or(inputs, output, proto: Protocols = DEFAULT) -> ProtocolSpec:
    ins = [CellAddress(*c) for c in inputs]
    out = CellAddress(*output)
    d = proto.exec_duration
    ramp = LineDrive.driven(Waveform.triangle(proto.or_v, d))
    drives = {c.sl: ramp for c in ins}
    drives[out.sl] = GROUNDED
    drives[out.wl] = LineDrive.driven(Waveform.dc(proto.exec_gate_v, d))
    drives[out.bl] = FLOATING
    roles = {f"x{k + 1}": c for k, c in enumerate(ins)}
    roles["y_out"] = out
    return _spec("exec_or", drives, d, proto, roles)


def protocol_not(x1, x_in, y_out, proto: Protocols = DEFAULT) -> ProtocolSpec:
    x1, x_in, y_out = CellAddress(*x1), CellAddress(*x_in), CellAddress(*y_out)
    d = proto.exec_duration
    drives = {
        x1.sl: LineDrive.driven(Waveform.triangle(proto.not_v, d)),
        x_in.sl: LineDrive.driven(Waveform.triangle(proto.not_v * proto.not_input_ratio, d)),
        y_out.sl: GROUNDED,
        y_out.wl: LineDrive.driven(Waveform.dc(proto.exec_gate_v, d)),
        y_out.bl: FLOATING,
    }
    return _spec("exec_not", drives, d, proto, {"x1": x1, "x_in": x_in, "y_out": y_out})


def run_protocol(state: CrossbarState, spec: ProtocolSpec) -> ExecutionTrace:
    """Apply ``spec`` (every unlisted line floating), run it, and float everything again."""
    state.float_all()
    for line, drive in spec.drives.items():
        state.set_drive(line, drive)
    try:
        return run_transient(state, spec.duration, spec.dt)
    finally:
        state.float_all()


# ---------------------------------------------------------------- runners


@dataclass
class ReadResult:
    cell: CellAddress
    logic: int
    current: float
    trace: ExecutionTrace


def read_cell(state: CrossbarState, cell, proto: Protocols = DEFAULT) -> ReadResult:
    c = CellAddress(*cell)
    trace = run_protocol(state, protocol_read(c, proto))
    current = float(trace.cell_current(c)[len(trace.t) // 2])
    return ReadResult(c, state.device(c).logic, current, trace)


def init_cell(state: CrossbarState, cell, target: int, proto: Protocols = DEFAULT) -> ExecutionTrace:
    """Load a logic value: SET for 1, RESET for 0, whatever the prior state."""
    if target not in (0, 1):
        raise ValueError(f"init target must be 0 or 1, got {target!r}")
    spec = protocol_set(cell, proto) if target else protocol_reset(cell, proto)
    return run_protocol(state, spec)


@dataclass
class GateResult:
    output: int
    read_current: float
    trace: ExecutionTrace
    switched: bool
    read_trace: ExecutionTrace | None = None


def _gate_result(state, out, trace, read, proto):
    switched = bool(trace.events_for(out))
    if not read:
        return GateResult(state.device(out).logic, float("nan"), trace, switched)
    r = read_cell(state, out, proto)
    return GateResult(r.logic, r.current, trace, switched, r.trace)


def exec_or(state: CrossbarState, inputs, output, proto: Protocols = DEFAULT, read: bool = True) -> GateResult:
    ins = [CellAddress(*c) for c in inputs]
    out = CellAddress(*output)
    if not ins:
        raise ProtocolError("OR needs at least one input")
    _column_check(ins + [out], state.geometry)
    if state.device(out).logic != 0:
        raise ProtocolError(f"OR output {out.name} must be initialized to 0 (HRS)")
    trace = run_protocol(state, protocol_or(ins, out, proto))
    return _gate_result(state, out, trace, read, proto)


def exec_not(state: CrossbarState, x1, x_in, y_out, proto: Protocols = DEFAULT, read: bool = True) -> GateResult:
    x1, x_in, y_out = CellAddress(*x1), CellAddress(*x_in), CellAddress(*y_out)
    _column_check([x1, x_in, y_out], state.geometry)
    if state.device(x1).logic != 1:
        raise ProtocolError(f"NOT helper {x1.name} must be initialized to 1 (LRS)")
    if state.device(y_out).logic != 0:
        raise ProtocolError(f"NOT output {y_out.name} must be initialized to 0 (HRS)")
    trace = run_protocol(state, protocol_not(x1, x_in, y_out, proto))
    return _gate_result(state, y_out, trace, read, proto)


# ---------------------------------------------------------------- harnesses

OR_CELLS = (CellAddress(0, 0), CellAddress(1, 0), CellAddress(2, 0))
NOT_CELLS = (CellAddress(0, 0), CellAddress(1, 0), CellAddress(2, 0))


def count_init_ops(inputs) -> tuple[int, int]:
    """(n_set, n_reset) to initialize an OR gate: one op per input bit plus the output RESET."""
    bits = [int(b) for b in inputs]
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"inputs must be bits, got {inputs!r}")
    n_set = sum(bits)
    return n_set, len(bits) - n_set + 1


@dataclass
class TruthCase:
    inputs: tuple[int, ...]
    output: int
    expected: int
    read_current: float
    input_read_currents: list[float]
    switched: bool
    init_traces: list[ExecutionTrace]
    exec_trace: ExecutionTrace
    read_trace: ExecutionTrace
    input_read_traces: list[ExecutionTrace]
    cells: dict[str, CellAddress]

    @property
    def ok(self) -> bool:
        return self.output == self.expected


@dataclass
class TruthTable:
    kind: str
    cases: list[TruthCase]

    def mapping(self) -> dict[tuple[int, ...], int]:
        return {c.inputs: c.output for c in self.cases}

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cases)


def run_gate_case(kind: str, state: CrossbarState, inputs, cells=None, proto: Protocols = DEFAULT) -> TruthCase:
    """Fully initialize the gate's devices (one Init each), execute, then read output and inputs."""
    inputs = tuple(int(b) for b in inputs)
    if kind == "or":
        *ins, out = [CellAddress(*c) for c in (cells or OR_CELLS)]
        if len(ins) != len(inputs):
            raise ValueError(f"OR over {len(ins)} cells needs {len(ins)} input bits")
        roles = {f"x{k + 1}": c for k, c in enumerate(ins)} | {"y_out": out}
        inits = [init_cell(state, c, b, proto) for c, b in zip(ins, inputs)]
        inits.append(init_cell(state, out, 0, proto))
        res = exec_or(state, ins, out, proto)
        expected = int(any(inputs))
        readable = ins
    elif kind == "not":
        if len(inputs) != 1:
            raise ValueError("NOT takes one input bit")
        x1, x_in, out = [CellAddress(*c) for c in (cells or NOT_CELLS)]
        roles = {"x1": x1, "x_in": x_in, "y_out": out}
        inits = [init_cell(state, x1, 1, proto), init_cell(state, x_in, inputs[0], proto),
                 init_cell(state, out, 0, proto)]
        res = exec_not(state, x1, x_in, out, proto)
        expected = 1 - inputs[0]
        readable = [x_in]
    else:
        raise ValueError(f"unknown gate {kind!r}")
    in_reads = [read_cell(state, c, proto) for c in readable]
    return TruthCase(
        inputs, res.output, expected, res.read_current, [r.current for r in in_reads], res.switched,
        inits, res.trace, res.read_trace, [r.trace for r in in_reads], roles,
    )


def gate_input_space(kind: str, fanin: int = 2):
    if kind == "or":
        return list(itertools.product((0, 1), repeat=fanin))
    if kind == "not":
        return [(0,), (1,)]
    raise ValueError(f"unknown gate {kind!r}")


def run_truth_table(kind: str, state: CrossbarState, cells=None, proto: Protocols = DEFAULT) -> TruthTable:
    fanin = len(cells) - 1 if (cells and kind == "or") else 2
    cases = [run_gate_case(kind, state, bits, cells, proto) for bits in gate_input_space(kind, fanin)]
    return TruthTable(kind, cases)


# ---------------------------------------------------------------- calibration


@dataclass
class CaseMargin:
    gate: str
    inputs: tuple[int, ...]
    expected: int
    observed: int
    peak_device_v: float
    post_switch_i: float
    v_set_th: float
    i_hold: float
    v_margin_pct: float
    i_margin_pct: float
    input_stress_v: float
    input_stress_i: float
    input_protect_pct: float | None

    @property
    def ok(self) -> bool:
        return self.observed == self.expected

    @property
    def switch_margin_pct(self) -> float:
        """Headroom in the direction the case needs: positive means the expected outcome holds at the ramp peak."""
        m = min(self.v_margin_pct, self.i_margin_pct)
        return m if self.expected else -m

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["inputs"] = "".join(map(str, self.inputs))
        d["switch_margin_pct"] = self.switch_margin_pct
        d["ok"] = self.ok
        return d


@dataclass
class CalibrationReport:
    cases: list[CaseMargin]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cases)

    def format(self) -> str:
        lines = [
            f"{'case':<8} {'exp':>3} {'obs':>3} {'Vdev_pk':>8} {'Ipost_uA':>9} {'V%':>8} {'I%':>8} "
            f"{'need%':>8} {'in_V':>6} {'in_uA':>7} {'prot%':>7}"
        ]
        for c in self.cases:
            prot = "-" if c.input_protect_pct is None else f"{c.input_protect_pct:7.1f}"
            lines.append(
                f"{c.gate + ' ' + ''.join(map(str, c.inputs)):<8} {c.expected:>3} {c.observed:>3} "
                f"{c.peak_device_v:8.3f} {c.post_switch_i * 1e6:9.2f} {c.v_margin_pct:8.1f} {c.i_margin_pct:8.1f} "
                f"{c.switch_margin_pct:8.1f} {c.input_stress_v:6.3f} {c.input_stress_i * 1e6:7.2f} {prot:>7}"
            )
        return "\n".join(lines)


def _peak_analysis(state, spec: ProtocolSpec, out: CellAddress, lrs_inputs: list[CellAddress]):
    """Static solves at the ramp peak: pre-switch output voltage, hypothetical post-switch current, post-switch input stress."""
    t_peak = spec.duration / 2
    state.float_all()
    for line, drive in spec.drives.items():
        state.set_drive(line, drive)
    try:
        g = state.geometry
        params = state.device(out).params
        pre = solve_instant(state, t_peak)
        post = solve_instant(state, t_peak, swap=(out, params.r_lrs))
        v_pk = pre.device_voltage(out, g)
        i_post = post.current(out, g)
        stress_v = stress_i = 0.0
        protect = None
        for c in lrs_inputs:
            v = -post.device_voltage(c, g)
            i = -post.current(c, g)
            p = state.device(c).params
            prot = -reset_margin(v, i, p) * 100
            if protect is None or prot < protect:
                protect, stress_v, stress_i = prot, v, i
        return v_pk, i_post, stress_v, stress_i, protect
    finally:
        state.float_all()


def calibrate_margins(
    params: DeviceParams | None = None,
    transistor: TransistorParams | None = None,
    geometry: ArrayGeometry | None = None,
    proto: Protocols = DEFAULT,
    strict: bool = True,
) -> CalibrationReport:
    """Run all six gate cases at nominal and report every threshold margin.

    Raises :class:`CalibrationError` naming the violated cases when any
    observed output disagrees with the ideal gate (unless ``strict=False``).
    """
    params = params or DeviceParams()
    geometry = geometry or ArrayGeometry()
    cases = []
    for kind in ("or", "not"):
        for bits in gate_input_space(kind):
            state = build_array(geometry, VariabilitySpec.nominal(params), params, transistor)
            tc = run_gate_case(kind, state, bits, proto=proto)
            # re-load the pre-execution states on a fresh array for the static analysis
            probe = build_array(geometry, VariabilitySpec.nominal(params), params, transistor)
            if kind == "or":
                *ins, out = OR_CELLS
                for c, b in zip(ins, bits):
                    probe.device(c).resistance = params.r_lrs if b else params.r_hrs
                spec = protocol_or(ins, out, proto)
                lrs = [c for c, b in zip(ins, bits) if b]
            else:
                x1, x_in, out = NOT_CELLS
                probe.device(x1).resistance = params.r_lrs
                probe.device(x_in).resistance = params.r_lrs if bits[0] else params.r_hrs
                spec = protocol_not(x1, x_in, out, proto)
                lrs = [x1] + ([x_in] if bits[0] else [])
            v_pk, i_post, sv, si, prot = _peak_analysis(probe, spec, out, lrs)
            cases.append(CaseMargin(
                kind, bits, tc.expected, tc.output, v_pk, i_post, params.v_set_th, params.i_hold,
                (v_pk - params.v_set_th) / params.v_set_th * 100,
                (i_post - params.i_hold) / params.i_hold * 100,
                sv, si, prot,
            ))
    report = CalibrationReport(cases)
    if strict and not report.ok:
        bad = [c for c in cases if not c.ok]
        detail = "; ".join(
            f"{c.gate} {''.join(map(str, c.inputs))}: expected {c.expected}, got {c.observed} "
            f"(V margin {c.v_margin_pct:.1f}%, I margin {c.i_margin_pct:.1f}%)"
            for c in bad
        )
        raise CalibrationError(f"nominal truth table violated: {detail}")
    return report


def with_params(params: DeviceParams, **changes) -> DeviceParams:
    return replace(params, **changes)
