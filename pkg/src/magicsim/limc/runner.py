"""Execute a compiled schedule on a simulated array."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from ..crossbar import ArrayGeometry, CellAddress, CrossbarState, ExecutionTrace, build_array
from ..device import DeviceParams, TransistorParams, VariabilitySpec
from ..energy import MODES, CostTable, EnergyBreakdown, coarse_cost, op_energies
from ..magic import DEFAULT, ExecNot, ExecOr, Init, ProtocolError, Protocols, Read, exec_not, exec_or, init_cell, read_cell
from .mapper import Schedule, ScheduleError


class ReadRecord(NamedTuple):
    op_index: int
    cell: CellAddress
    logic: int
    current_a: float


@dataclass
class ScheduleRun:
    output: int
    reads: list[ReadRecord]
    fine: dict[str, EnergyBreakdown] = field(default_factory=dict)
    coarse: dict[str, EnergyBreakdown] = field(default_factory=dict)
    events: int = 0
    traces: list[tuple[int, str, ExecutionTrace]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "output": self.output,
            "events": self.events,
            "reads": [r._asdict() | {"cell": list(r.cell)} for r in self.reads],
            "fine": {m: b.as_dict() for m, b in self.fine.items()},
            "coarse": {m: b.as_dict() for m, b in self.coarse.items()},
        }


def _target(t, assignment, nets, k):
    if isinstance(t, int):
        return t
    if t.startswith("@"):
        if t[1:] not in nets:
            raise ScheduleError(f"init from unknown net {t!r}", k)
        return nets[t[1:]]
    if t not in assignment:
        raise ScheduleError(f"no value assigned to input {t!r}", k)
    v = int(assignment[t])
    if v not in (0, 1):
        raise ScheduleError(f"input {t!r} must be 0 or 1, got {assignment[t]!r}", k)
    return v


def simulate_schedule(
    schedule: Schedule,
    assignment: dict,
    state: CrossbarState | None = None,
    proto: Protocols = DEFAULT,
    table: CostTable | None = None,
    params: DeviceParams | None = None,
    geometry: ArrayGeometry | None = None,
    transistor: TransistorParams | None = None,
    energy: bool = True,
    keep_traces: bool = False,
) -> ScheduleRun:
    """Run every micro-op as a transient and account energy both ways.

    Fine energy integrates each op's own trace. Coarse energy prices inits
    and reads from the cost table and takes exec energy from the
    simulation, so both views share the same exec figures. With
    ``energy=False`` only the logic result is produced. The reported output
    is the last read of ``schedule.output_cell``.
    """
    params = params or DeviceParams()
    table = table or CostTable()
    if state is None:
        state = build_array(geometry, VariabilitySpec.nominal(params), params, transistor)
    fine = {m: EnergyBreakdown(m) for m in MODES}
    nets: dict[str, int] = {}
    reads = []
    exec_e = {m: [] for m in MODES}
    n_events = 0
    traces = []
    for k, op in enumerate(schedule.ops):
        try:
            if isinstance(op, Init):
                v = _target(op.target, assignment, nets, k)
                trace = init_cell(state, op.cell, v, proto)
                cell, phase, name = op.cell, "init", "set" if v else "reset"
            elif isinstance(op, ExecOr):
                trace = exec_or(state, op.inputs, op.output, proto, read=False).trace
                cell, phase, name = op.output, "exec", "exec_or"
            elif isinstance(op, ExecNot):
                trace = exec_not(state, op.x1, op.x_in, op.y_out, proto, read=False).trace
                cell, phase, name = op.y_out, "exec", "exec_not"
            elif isinstance(op, Read):
                r = read_cell(state, op.cell, proto)
                trace = r.trace
                cell, phase, name = op.cell, "read", "read_lrs" if r.logic else "read_hrs"
                reads.append(ReadRecord(k, op.cell, r.logic, r.current))
                if op.net is not None:
                    nets[op.net] = r.logic
            else:
                raise ScheduleError(f"unknown op {op!r}", k)
        except (ProtocolError, ValueError, IndexError) as exc:
            raise ScheduleError(str(exc), k) from exc
        n_events += len(trace.events)
        if keep_traces:
            traces.append((k, name, trace))
        if not energy:
            continue
        e = op_energies(trace, cell, state.device(cell).params)
        for m in MODES:
            fine[m].add(k, name, phase, e[m], "sim")
            if phase == "exec":
                exec_e[m].append(e[m])
    out_reads = [r for r in reads if r.cell == schedule.output_cell]
    if not out_reads:
        raise ScheduleError("schedule never reads its output")
    output = out_reads[-1].logic
    if not energy:
        return ScheduleRun(output, reads, events=n_events, traces=traces)
    coarse = {m: coarse_cost(schedule.ops, {**assignment, **nets}, table, m, exec_e[m]) for m in MODES}
    return ScheduleRun(output, reads, fine, coarse, n_events, traces)
