"""8x4 1T1R crossbar topology and nodal-analysis transient simulation.

Every cell ``(row, col)`` is a memristor on the bit line side (its TE on
``BL{col+1}``) in series with an NMOS whose gate is ``WL{col+1}`` and whose
source is ``SL{row+1}``. Positive device voltage means TE above the internal
node, the SET direction.
"""
from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _backend
from .device import DeviceParams, DeviceState, TransistorParams, VariabilitySpec, c2c_resistance, sample_device


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int = 8
    cols: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"geometry must be at least 1x1, got {self.rows}x{self.cols}")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def line_names(self) -> list[str]:
        return (
            [f"WL{j + 1}" for j in range(self.cols)]
            + [f"SL{i + 1}" for i in range(self.rows)]
            + [f"BL{j + 1}" for j in range(self.cols)]
        )


class CellAddress(NamedTuple):
    row: int
    col: int

    def index(self, geometry: ArrayGeometry) -> int:
        return self.row * geometry.cols + self.col

    @property
    def name(self) -> str:
        return f"r{self.row}c{self.col}"

    def check(self, geometry: ArrayGeometry) -> "CellAddress":
        if not (0 <= self.row < geometry.rows and 0 <= self.col < geometry.cols):
            raise IndexError(f"cell {tuple(self)} outside {geometry.rows}x{geometry.cols} array")
        return self

    @property
    def wl(self) -> str:
        return f"WL{self.col + 1}"

    @property
    def sl(self) -> str:
        return f"SL{self.row + 1}"

    @property
    def bl(self) -> str:
        return f"BL{self.col + 1}"


class Waveform:
    """Piecewise-linear voltage over ``[0, duration]``."""

    def __init__(self, points, duration: float | None = None):
        pts = [(float(t), float(v)) for t, v in points]
        if not pts or pts[0][0] != 0.0:
            raise ValueError("waveform must start at t=0")
        if any(b[0] < a[0] for a, b in zip(pts, pts[1:])):
            raise ValueError("waveform breakpoints must be time-sorted")
        self.duration = float(duration if duration is not None else pts[-1][0])
        if self.duration < pts[-1][0] or self.duration <= 0:
            raise ValueError("duration must be positive and cover every breakpoint")
        self.times = np.array([t for t, _ in pts])
        self.volts = np.array([v for _, v in pts])

    @classmethod
    def triangle(cls, peak: float, duration: float) -> "Waveform":
        return cls([(0.0, 0.0), (duration / 2, peak), (duration, 0.0)])

    @classmethod
    def dc(cls, level: float, duration: float) -> "Waveform":
        return cls([(0.0, level), (duration, level)])

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(zip(self.times, self.volts * factor), self.duration)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.volts)))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0) or np.any(t_arr > self.duration * (1 + 1e-12)):
            raise ValueError(f"waveform evaluated outside [0, {self.duration}]")
        out = np.interp(t_arr, self.times, self.volts)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LineDrive:
    kind: str  # "driven" | "grounded" | "floating"
    waveform: Waveform | None = None

    @classmethod
    def driven(cls, waveform: Waveform) -> "LineDrive":
        return cls("driven", waveform)

    @classmethod
    def grounded(cls) -> "LineDrive":
        return cls("grounded")

    @classmethod
    def floating(cls) -> "LineDrive":
        return cls("floating")

    def __post_init__(self):
        if self.kind not in ("driven", "grounded", "floating"):
            raise ValueError(f"unknown drive kind {self.kind!r}")
        if (self.kind == "driven") != (self.waveform is not None):
            raise ValueError("exactly the driven variant carries a waveform")

    @property
    def fixed(self) -> bool:
        return self.kind != "floating"

    def sample(self, times: np.ndarray) -> np.ndarray:
        if self.kind == "driven":
            return self.waveform(times)
        if self.kind == "grounded":
            return np.zeros_like(times)
        return np.full_like(times, np.nan)


FLOATING = LineDrive.floating()
GROUNDED = LineDrive.grounded()


@dataclass
class CrossbarState:
    geometry: ArrayGeometry
    devices: list[DeviceState]
    transistor: TransistorParams = field(default_factory=TransistorParams)
    variability: VariabilitySpec = field(default_factory=VariabilitySpec.nominal)
    drives: dict[str, LineDrive] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.devices) != self.geometry.size:
            raise ValueError("one device per cell required")
        for name in self.geometry.line_names():
            self.drives.setdefault(name, FLOATING)

    def device(self, cell) -> DeviceState:
        cell = CellAddress(*cell).check(self.geometry)
        return self.devices[cell.index(self.geometry)]

    def set_drive(self, line: str, drive: LineDrive) -> None:
        if line not in self.drives:
            raise KeyError(f"no line named {line!r}")
        self.drives[line] = drive

    def float_all(self) -> None:
        for name in self.drives:
            self.drives[name] = FLOATING

    def resistances(self) -> np.ndarray:
        return np.array([d.resistance for d in self.devices])

    def logic(self) -> np.ndarray:
        return np.array([d.logic for d in self.devices], dtype=np.int8)

    def clone(self) -> "CrossbarState":
        return copy.deepcopy(self)

    def cells(self):
        for i in range(self.geometry.rows):
            for j in range(self.geometry.cols):
                yield CellAddress(i, j)


def build_array(
    geometry: ArrayGeometry | None = None,
    spec: VariabilitySpec | None = None,
    base: DeviceParams | None = None,
    transistor: TransistorParams | None = None,
) -> CrossbarState:
    """Sample every device (index ``row * cols + col``) and start it in HRS with all lines floating."""
    geometry = geometry or ArrayGeometry()
    base = base or DeviceParams()
    spec = spec or VariabilitySpec.nominal(base)
    devices = []
    for k in range(geometry.size):
        params = sample_device(spec, k, base)
        devices.append(DeviceState(params, params.r_hrs))
    return CrossbarState(geometry, devices, transistor or TransistorParams(), spec)


def form_array(state: CrossbarState) -> None:
    """Electroforming stand-in: pristine devices become HRS, at no energy cost."""
    for d in state.devices:
        if d.pristine:
            d.pristine = False
            d.resistance = d.params.r_hrs


# ---------------------------------------------------------------- solving


class _Network:
    """Per-step arrays fed to the kernel, sampled once per transient."""

    def __init__(self, state: CrossbarState, times: np.ndarray):
        g = state.geometry
        self.rows, self.cols = g.rows, g.cols
        node_lines = [f"SL{i + 1}" for i in range(g.rows)] + [f"BL{j + 1}" for j in range(g.cols)]
        drives = [state.drives[name] for name in node_lines]
        self.fixed = np.array([d.fixed for d in drives], dtype=np.uint8)
        self.drive = np.zeros((len(times), len(node_lines)))
        for k, d in enumerate(drives):
            if d.fixed:
                self.drive[:, k] = d.sample(times)
        wl = np.empty((len(times), g.cols))
        for j in range(g.cols):
            wl[:, j] = state.drives[f"WL{j + 1}"].sample(times)
        self.wl = wl
        tr = state.transistor
        on = wl >= tr.v_gate_on  # NaN (floating gate) compares False
        self.gate = on.view(np.uint8)
        self.imax = tr.compliance_current(np.where(on, wl, 0.0))
        self.r_on = tr.r_on


@dataclass
class NodeSolution:
    line_voltages: dict[str, float]
    currents: np.ndarray  # per branch, BL -> SL positive
    device_voltages: np.ndarray
    indeterminate: list[str]

    def current(self, cell, geometry: ArrayGeometry) -> float:
        return float(self.currents[CellAddress(*cell).index(geometry)])

    def device_voltage(self, cell, geometry: ArrayGeometry) -> float:
        return float(self.device_voltages[CellAddress(*cell).index(geometry)])


def solve_instant(state: CrossbarState, t: float, swap: tuple | None = None) -> NodeSolution:
    """Kirchhoff solve of the array at time ``t``.

    ``swap=(cell, resistance)`` solves as if that one device had the given
    resistance, without touching the state.
    """
    net = _Network(state, np.array([float(t)]))
    g = state.geometry
    res = state.resistances()
    swap_idx, swap_r = -1, 0.0
    if swap is not None:
        swap_idx, swap_r = CellAddress(*swap[0]).check(g).index(g), float(swap[1])
    v = np.empty(g.rows + g.cols)
    i = np.empty(g.size)
    dv = np.empty(g.size)
    _backend.kernel.solve(g.rows, g.cols, net.fixed, net.drive[0], net.gate[0], net.imax[0], res,
                          net.r_on, swap_idx, swap_r, v, i, dv)
    names = [f"SL{k + 1}" for k in range(g.rows)] + [f"BL{k + 1}" for k in range(g.cols)]
    volts = dict(zip(names, v.tolist()))
    for j in range(g.cols):
        volts[f"WL{j + 1}"] = float(net.wl[0, j])
    indeterminate = [n for n in names if math.isnan(volts[n])]
    return NodeSolution(volts, i, dv, indeterminate)


@dataclass
class SwitchEvent:
    cell: CellAddress
    old: int
    new: int
    t: float
    step: int
    margin: float
    current: float

    def as_dict(self) -> dict:
        return {"cell": self.cell.name, "from": self.old, "to": self.new, "t": self.t}


@dataclass
class ExecutionTrace:
    geometry: ArrayGeometry
    t: np.ndarray
    node_v: np.ndarray  # (samples, rows + cols): SL1.., BL1..
    wl_v: np.ndarray  # (samples, cols)
    gate: np.ndarray  # (samples, cols) channel open
    currents: np.ndarray  # (samples, cells)
    device_v: np.ndarray  # (samples, cells)
    events: list[SwitchEvent]
    driven: list[str]
    floating: list[str]
    dt: float

    @property
    def duration(self) -> float:
        return float(self.t[-1])

    def line_voltage(self, name: str) -> np.ndarray:
        kind, k = name[:2], int(name[2:]) - 1
        if kind == "WL":
            return self.wl_v[:, k]
        if kind == "SL":
            return self.node_v[:, k]
        if kind == "BL":
            return self.node_v[:, self.geometry.rows + k]
        raise KeyError(name)

    def line_current(self, name: str) -> np.ndarray:
        """Current the line's driver pushes into the array."""
        g = self.geometry
        kind, k = name[:2], int(name[2:]) - 1
        cur = self.currents.reshape(len(self.t), g.rows, g.cols)
        if kind == "BL":
            return cur[:, :, k].sum(axis=1)
        if kind == "SL":
            return -cur[:, k, :].sum(axis=1)
        return np.zeros(len(self.t))

    def source_power(self) -> np.ndarray:
        p = np.zeros(len(self.t))
        for name in self.driven:
            p += self.line_voltage(name) * self.line_current(name)
        return p

    def cell_current(self, cell) -> np.ndarray:
        return self.currents[:, CellAddress(*cell).index(self.geometry)]

    def cell_voltage(self, cell) -> np.ndarray:
        return self.device_v[:, CellAddress(*cell).index(self.geometry)]

    def events_for(self, cell) -> list[SwitchEvent]:
        cell = CellAddress(*cell)
        return [e for e in self.events if e.cell == cell]

    def active_cells(self) -> list[CellAddress]:
        g = self.geometry
        on = np.any(self.currents != 0, axis=0)
        return [CellAddress(*divmod(b, g.cols)) for b in np.flatnonzero(on)]

    def kcl_residuals(self) -> np.ndarray:
        """Per-sample worst KCL imbalance over the solved floating nodes, relative to the largest branch current (floor 1 uA)."""
        g = self.geometry
        cur = self.currents.reshape(len(self.t), g.rows, g.cols)
        worst = np.zeros(len(self.t))
        for name in self.floating:
            v = self.line_voltage(name)
            net = self.line_current(name)
            net = np.where(np.isnan(v), 0.0, np.abs(net))
            worst = np.maximum(worst, net)
        scale = np.maximum(np.abs(cur).reshape(len(self.t), -1).max(axis=1), 1e-6)
        return worst / scale

    def to_csv(self, path) -> None:
        g = self.geometry
        active = self.active_cells()
        header = ["t"] + g.line_names()
        for c in active:
            header += [f"{c.name}_i", f"{c.name}_v"]
        cols = [self.t] + [self.line_voltage(n) for n in g.line_names()]
        for c in active:
            cols += [self.cell_current(c), self.cell_voltage(c)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([repr(float(x)) for x in row])

    def events_to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump([e.as_dict() for e in self.events], fh, indent=2)


def time_grid(duration: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = math.ceil(duration / dt - 1e-9)
    return np.minimum(np.arange(n + 1) * dt, duration)


def run_transient(state: CrossbarState, duration: float, dt: float | None = None) -> ExecutionTrace:
    """Step the array under its current drives, committing at most one switch per step.

    Each step solves the network, tests every conducting device (SET needs the
    hypothetical post-switch current, costing one extra solve per candidate),
    and commits the best-margin candidate. The step is then re-solved so the
    recorded sample shows the post-switch network.
    """
    if dt is None:
        dt = duration / 2000
    times = time_grid(duration, dt)
    g = state.geometry
    net = _Network(state, times)
    ns, nb = len(times), g.size
    out_v = np.empty((ns, g.rows + g.cols))
    out_i = np.empty((ns, nb))
    out_dv = np.empty((ns, nb))
    params = [d.params for d in state.devices]
    r_lrs = np.array([p.r_lrs for p in params])
    v_set = np.array([p.v_set_th for p in params])
    v_reset = np.array([p.v_reset_th for p in params])
    i_hold = np.array([p.i_hold for p in params])
    i_reset = np.array([p.i_reset_min for p in params])
    res = state.resistances()
    is_lrs = state.logic().astype(np.uint8)
    kernel = _backend.kernel
    events = []
    k, check_first = 0, True
    while True:
        step, b, kind, margin, i_post = kernel.advance(
            k, check_first, g.rows, g.cols, net.fixed, net.drive, net.gate, net.imax,
            res, is_lrs, r_lrs, v_set, v_reset, i_hold, i_reset, net.r_on, out_v, out_i, out_dv,
        )
        if b < 0:
            break
        dev = state.devices[b]
        new = 1 if kind == 1 else 0
        dev.resistance = c2c_resistance(dev.params, new, state.variability, b, dev.cycle_count)
        dev.cycle_count += 1
        res[b] = dev.resistance
        is_lrs[b] = dev.logic
        events.append(SwitchEvent(CellAddress(*divmod(b, g.cols)), 1 - new, new, float(times[step]), int(step), float(margin), float(i_post)))
        k, check_first = step, False
    node_names = [f"SL{i + 1}" for i in range(g.rows)] + [f"BL{j + 1}" for j in range(g.cols)]
    driven = [n for n in g.line_names() if state.drives[n].kind == "driven" and not n.startswith("WL")]
    floating = [n for n in node_names if state.drives[n].kind == "floating"]
    return ExecutionTrace(g, times, out_v, net.wl, net.gate, out_i, out_dv, events, driven, floating, dt)
