"""Per-phase energy accounting for MAGIC operations.

Two routes are kept side by side: integrating v(t)*i(t) over simulated
traces (fine), and multiplying per-operation costs by operation counts
(coarse). Each has a full-ramp and an optimal-window mode.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .crossbar import CellAddress, ExecutionTrace
from .device import DeviceParams

FULL = "full"
OPTIMAL = "optimal"
MODES = (FULL, OPTIMAL)
NJ = 1e9


class EmptySelectionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CostTable:
    """Per-operation energies (nJ) and durations (s).

    SET/RESET costs follow the measured table with its SET and RESET rows
    swapped back to match the applied voltages (0-1.8 V SET, 0-2 V RESET);
    the swap is what makes the per-input initialization totals add up.
    """

    set_full: float = 312.0
    reset_full: float = 1300.0
    set_opt: float = 274.0
    reset_opt: float = 232.0
    read_lrs: float = 5.4
    read_hrs: float = 0.056
    read_lrs_opt: float = 2.8
    read_hrs_opt: float = 0.035
    set_duration: float = 3.6e-3
    reset_duration: float = 4e-3
    read_duration: float = 0.6e-6

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"{k} must be non-negative")
        for full, opt in (("set_full", "set_opt"), ("reset_full", "reset_opt"),
                          ("read_lrs", "read_lrs_opt"), ("read_hrs", "read_hrs_opt")):
            if getattr(self, opt) > getattr(self, full):
                raise ValueError(f"{opt} exceeds {full}")

    def init_cost(self, target: int, mode: str) -> float:
        _check_mode(mode)
        if target:
            return self.set_full if mode == FULL else self.set_opt
        return self.reset_full if mode == FULL else self.reset_opt

    def read_cost(self, logic: int, mode: str) -> float:
        _check_mode(mode)
        if logic:
            return self.read_lrs if mode == FULL else self.read_lrs_opt
        return self.read_hrs if mode == FULL else self.read_hrs_opt


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass(frozen=True)
class PhaseWindow:
    t_start: float
    t_end: float
    event_time: float | None = None
    guard: float = 0.0
    how: str = "full"  # "full" | "event" | "peak"

    def __post_init__(self):
        if not 0 <= self.t_start < self.t_end:
            raise ValueError(f"bad window [{self.t_start}, {self.t_end}]")

    def check(self, trace: ExecutionTrace) -> "PhaseWindow":
        if self.t_end > trace.duration * (1 + 1e-12):
            raise ValueError("window extends past the end of the trace")
        return self


def full_window(trace: ExecutionTrace) -> PhaseWindow:
    return PhaseWindow(0.0, trace.duration)


def pwl_product_integral(t, v, i, t0: float, t1: float) -> float:
    """Exact integral of the product of two piecewise-linear signals on [t0, t1]."""
    t = np.asarray(t, dtype=float)
    inside = (t > t0) & (t < t1)
    tt = np.concatenate(([t0], t[inside], [t1]))
    vv = np.interp(tt, t, v)
    ii = np.interp(tt, t, i)
    h = np.diff(tt)
    return float(np.sum(h / 6 * (2 * vv[:-1] * ii[:-1] + vv[:-1] * ii[1:] + vv[1:] * ii[:-1] + 2 * vv[1:] * ii[1:])))


def integrate_energy(trace: ExecutionTrace, window: PhaseWindow | None = None, cells=None) -> float:
    """Energy in nJ over ``window``.

    With ``cells=None`` this is the energy delivered by every driven line
    (line voltage times the current it pushes into the array); otherwise the
    energy dissipated in the listed devices.
    """
    window = (window or full_window(trace)).check(trace)
    a, b = window.t_start, window.t_end
    total = 0.0
    if cells is None:
        if not trace.driven:
            warnings.warn("no driven lines in trace", EmptySelectionWarning, stacklevel=2)
        for name in trace.driven:
            total += pwl_product_integral(trace.t, trace.line_voltage(name), trace.line_current(name), a, b)
    else:
        cells = list(cells)
        if not cells:
            warnings.warn("empty device selection", EmptySelectionWarning, stacklevel=2)
        for c in cells:
            total += pwl_product_integral(trace.t, trace.cell_voltage(c), trace.cell_current(c), a, b)
    return total * NJ


def detect_optimal_window(trace: ExecutionTrace, cell, params: DeviceParams | None = None,
                          guard_steps: int = 10) -> PhaseWindow:
    """Window from the first threshold crossing to just past the cell's switch event.

    Without an event, a narrow window around the cell's peak power stands in
    for the minimal non-switching pulse.
    """
    params = params or DeviceParams()
    cell = CellAddress(*cell)
    guard = guard_steps * trace.dt
    end = trace.duration
    events = trace.events_for(cell)
    dv = trace.cell_voltage(cell)
    if events:
        ev = events[0]
        if ev.new == 1:
            crossed = np.flatnonzero(dv >= params.v_set_th)
        else:
            crossed = np.flatnonzero(-dv >= params.v_reset_th)
        t_th = float(trace.t[crossed[0]]) if len(crossed) else ev.t
        t_end = min(ev.t + guard, end)
        t_start = min(t_th, ev.t)
        if t_start >= t_end:
            t_start = max(0.0, t_end - guard)
        return PhaseWindow(t_start, t_end, ev.t, guard, "event")
    power = np.abs(dv * trace.cell_current(cell))
    k = int(np.argmax(power))
    tk = float(trace.t[k])
    t_start, t_end = max(0.0, tk - guard), min(end, tk + guard)
    return PhaseWindow(t_start, t_end, None, guard, "peak")


def op_energies(trace: ExecutionTrace, cell, params: DeviceParams | None = None) -> dict[str, float]:
    """Source energy of one operation's trace in both modes (nJ)."""
    return {
        FULL: integrate_energy(trace),
        OPTIMAL: integrate_energy(trace, detect_optimal_window(trace, cell, params)),
    }


# ---------------------------------------------------------------- breakdowns


class Percentages(NamedTuple):
    init: float
    exec: float
    read: float
    zero_total: bool = False


@dataclass
class EnergyItem:
    index: int
    op: str
    phase: str
    nj: float
    source: str  # "coarse" | "sim" | "supplied"


@dataclass
class EnergyBreakdown:
    mode: str
    init_nj: float = 0.0
    exec_nj: float = 0.0
    read_nj: float = 0.0
    items: list[EnergyItem] = field(default_factory=list)

    @property
    def total_nj(self) -> float:
        return self.init_nj + self.exec_nj + self.read_nj

    def add(self, index: int, op: str, phase: str, nj: float, source: str) -> None:
        if nj < 0:
            raise ValueError("phase energies must be non-negative")
        setattr(self, f"{phase}_nj", getattr(self, f"{phase}_nj") + nj)
        self.items.append(EnergyItem(index, op, phase, nj, source))

    def percentages(self) -> Percentages:
        return breakdown_percentages(self)

    def as_dict(self) -> dict:
        p = self.percentages()
        return {
            "mode": self.mode,
            "init_nJ": self.init_nj,
            "exec_nJ": self.exec_nj,
            "read_nJ": self.read_nj,
            "total_nJ": self.total_nj,
            "init_pct": p.init,
            "exec_pct": p.exec,
            "read_pct": p.read,
            "items": [asdict(it) for it in self.items],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "op", "phase", "nJ", "source", "mode"])
            for it in self.items:
                w.writerow([it.index, it.op, it.phase, repr(it.nj), it.source, self.mode])


def breakdown_percentages(b) -> Percentages:
    """Phase shares of the total; accepts a breakdown or an ``(init, exec, read)`` triple."""
    if isinstance(b, EnergyBreakdown):
        init, exe, read = b.init_nj, b.exec_nj, b.read_nj
    else:
        init, exe, read = b
    total = init + exe + read
    if total == 0:
        return Percentages(0.0, 0.0, 0.0, True)
    return Percentages(100 * init / total, 100 * exe / total, 100 * read / total)


def _resolve(target, assignment, nets):
    if isinstance(target, int) and not isinstance(target, bool) and target in (0, 1):
        return target
    if isinstance(target, str):
        if target.startswith("@"):
            return nets[target[1:]]
        return int(assignment[target])
    raise ValueError(f"bad init target {target!r}")


def coarse_cost(ops: Sequence, assignment: dict, table: CostTable, mode: str,
                exec_nj: float | Sequence[float] = 0.0) -> EnergyBreakdown:
    """Cost-table accounting of a micro-op stream.

    Every Init costs one SET or RESET by its target value; every Read costs
    by the logic the device holds at that point (tracked with ideal gate
    semantics). Execution energy is supplied, either as one total or one
    value per exec op.
    """
    from .magic import ExecNot, ExecOr, Init, Read

    _check_mode(mode)
    out = EnergyBreakdown(mode)
    logic: dict[CellAddress, int] = {}
    nets: dict[str, int] = {}
    exec_ops = [k for k, op in enumerate(ops) if isinstance(op, (ExecOr, ExecNot))]
    per_exec = None
    if not isinstance(exec_nj, (int, float)):
        per_exec = list(exec_nj)
        if len(per_exec) != len(exec_ops):
            raise ValueError(f"{len(per_exec)} exec energies for {len(exec_ops)} exec ops")
    for k, op in enumerate(ops):
        if isinstance(op, Init):
            v = _resolve(op.target, assignment, nets)
            logic[op.cell] = v
            out.add(k, "set" if v else "reset", "init", table.init_cost(v, mode), "coarse")
        elif isinstance(op, ExecOr):
            logic[op.output] = int(any(logic.get(c, 0) for c in op.inputs))
            if per_exec is not None:
                out.add(k, "exec_or", "exec", per_exec[exec_ops.index(k)], "supplied")
        elif isinstance(op, ExecNot):
            logic[op.y_out] = 1 - logic.get(op.x_in, 0)
            if per_exec is not None:
                out.add(k, "exec_not", "exec", per_exec[exec_ops.index(k)], "supplied")
        elif isinstance(op, Read):
            v = logic.get(op.cell, 0)
            if op.net is not None:
                nets[op.net] = v
            out.add(k, "read_lrs" if v else "read_hrs", "read", table.read_cost(v, mode), "coarse")
        else:
            raise TypeError(f"unknown op kind {type(op).__name__}")
    if per_exec is None and exec_nj:
        out.add(len(ops), "exec", "exec", float(exec_nj), "supplied")
    return out


# ---------------------------------------------------------------- reference OR-gate energy comparison

OR_INPUTS = ("00", "01", "10", "11")
MEASURED_EXEC = {FULL: {"00": 139.0, "01": 2455.0, "10": 2300.0, "11": 3531.0},
                 OPTIMAL: {"00": 8.0, "01": 108.0, "10": 73.0, "11": 134.0}}
REPORTED_INIT = {FULL: {"00": 3900.0, "01": 2912.0, "10": 2912.0, "11": 1924.0},
                 OPTIMAL: {"00": 696.0, "01": 738.0, "10": 738.0, "11": 780.0}}
REPORTED_READ = {FULL: {"00": 0.1, "01": 5.4, "10": 5.4, "11": 10.8},
                 OPTIMAL: {"00": 0.07, "01": 2.8, "10": 2.8, "11": 5.6}}
REPORTED_INIT_PCT = {FULL: {"00": 97, "01": 54, "10": 56, "11": 35},
                     OPTIMAL: {"00": 99, "01": 87, "10": 91, "11": 85}}
REPORTED_READ_PCT = {FULL: {"00": 0.002, "01": 0.1, "10": 0.1, "11": 0.2},
                     OPTIMAL: {"00": 0.003, "01": 0.1, "10": 0.1, "11": 0.2}}


def or_gate_ops(bits: str, cells=None, read: str = "inputs") -> list:
    """Micro-ops for one OR evaluation; ``read`` picks which devices are read afterwards."""
    from .magic import OR_CELLS, ExecOr, Init, Read

    *ins, out = [CellAddress(*c) for c in (cells or OR_CELLS)]
    ops = [Init(c, int(b)) for c, b in zip(ins, bits)] + [Init(out, 0), ExecOr(tuple(ins), out)]
    if read in ("inputs", "all"):
        ops += [Read(c) for c in ins]
    if read in ("output", "all"):
        ops.append(Read(out))
    return ops


@dataclass
class EnergyTableRow:
    inputs: str
    mode: str
    init_nj: float
    read_nj: float
    exec_measured_nj: float
    exec_sim_nj: float
    init_pct_measured_exec: float
    read_pct_measured_exec: float
    init_pct_sim_exec: float
    read_pct_sim_exec: float
    reported_init_pct: float
    reported_read_pct: float
    provenance: dict = field(default_factory=lambda: {
        "init_nj": "coarse", "read_nj": "coarse", "exec_measured_nj": "measured", "exec_sim_nj": "sim",
        "reported_init_pct": "measured", "reported_read_pct": "measured",
    })

    def as_dict(self) -> dict:
        return asdict(self)


def simulated_or_exec(proto=None, params: DeviceParams | None = None, transistor=None, geometry=None) -> dict:
    """Simulated OR execution energy per input in both modes, at nominal parameters."""
    from .crossbar import build_array
    from .device import VariabilitySpec
    from .magic import DEFAULT, run_gate_case

    params = params or DeviceParams()
    out = {FULL: {}, OPTIMAL: {}}
    for bits in OR_INPUTS:
        state = build_array(geometry, VariabilitySpec.nominal(params), params, transistor)
        case = run_gate_case("or", state, bits, proto=proto or DEFAULT)
        e = op_energies(case.exec_trace, case.cells["y_out"], params)
        out[FULL][bits] = e[FULL]
        out[OPTIMAL][bits] = e[OPTIMAL]
    return out


def or_energy_table(table: CostTable | None = None, sim_exec: dict | None = None, modes=MODES) -> list[EnergyTableRow]:
    """The four-input OR comparison in both modes, in input order 00, 01, 10, 11."""
    table = table or CostTable()
    sim_exec = sim_exec if sim_exec is not None else simulated_or_exec()
    rows = []
    for mode in modes:
        for bits in OR_INPUTS:
            ops = or_gate_ops(bits)
            coarse = coarse_cost(ops, {}, table, mode)
            meas = breakdown_percentages((coarse.init_nj, MEASURED_EXEC[mode][bits], coarse.read_nj))
            sim = breakdown_percentages((coarse.init_nj, sim_exec[mode][bits], coarse.read_nj))
            rows.append(EnergyTableRow(
                bits, mode, coarse.init_nj, coarse.read_nj, MEASURED_EXEC[mode][bits], sim_exec[mode][bits],
                meas.init, meas.read, sim.init, sim.read,
                REPORTED_INIT_PCT[mode][bits], REPORTED_READ_PCT[mode][bits],
            ))
    return rows
