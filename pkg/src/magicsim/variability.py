"""Monte Carlo device characterization and gate-yield estimation."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .crossbar import ArrayGeometry, build_array
from .device import DeviceParams, TransistorParams, VariabilitySpec, cycle_device, sample_device
from .magic import DEFAULT, ProtocolError, Protocols, gate_input_space, run_gate_case
from .svg import cdf_plot


@dataclass
class Characterization:
    devices: list[DeviceParams]
    hrs: np.ndarray  # (devices, cycles)
    lrs: np.ndarray

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @property
    def n_cycles(self) -> int:
        return self.hrs.shape[1]


def characterize(n_devices: int, n_cycles: int, spec: VariabilitySpec, base: DeviceParams | None = None) -> Characterization:
    """Sample ``n_devices`` devices and cycle each ``n_cycles`` times (D2D then C2C spread)."""
    if n_devices < 1 or n_cycles < 1:
        raise ValueError("devices and cycles must be positive")
    devs, hrs, lrs = [], [], []
    for k in range(n_devices):
        p = sample_device(spec, k, base)
        rec = cycle_device(p, spec, k, n_cycles)
        devs.append(p)
        hrs.append(rec.hrs)
        lrs.append(rec.lrs)
    return Characterization(devs, np.array(hrs), np.array(lrs))


def empirical_cdf(values) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(values, dtype=float).ravel())
    return x, np.arange(1, len(x) + 1) / len(x)


def _write_cdf(path, values):
    x, c = empirical_cdf(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["resistance_ohm", "cdf"])
        for a, b in zip(x, c):
            w.writerow([repr(float(a)), repr(float(b))])


def write_characterization(ch: Characterization, out_dir) -> dict[str, str]:
    """hrs_cdf.csv, lrs_cdf.csv, devices.csv and cdf.svg under ``out_dir``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name) for name in ("hrs_cdf.csv", "lrs_cdf.csv", "devices.csv", "cdf.svg")}
    _write_cdf(paths["hrs_cdf.csv"], ch.hrs)
    _write_cdf(paths["lrs_cdf.csv"], ch.lrs)
    with open(paths["devices.csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["device", "r_hrs_ohm", "r_lrs_ohm", "ratio", "hrs_min_ohm", "hrs_max_ohm", "lrs_min_ohm", "lrs_max_ohm"])
        for k, p in enumerate(ch.devices):
            w.writerow([k, repr(p.r_hrs), repr(p.r_lrs), repr(p.r_hrs / p.r_lrs),
                        repr(float(ch.hrs[k].min())), repr(float(ch.hrs[k].max())),
                        repr(float(ch.lrs[k].min())), repr(float(ch.lrs[k].max()))])
    series = {"HRS": empirical_cdf(ch.hrs), "LRS": empirical_cdf(ch.lrs)}
    svg = cdf_plot({k: (list(x), list(c)) for k, (x, c) in series.items()},
                   f"{ch.n_devices} devices x {ch.n_cycles} cycles", "resistance (ohm)")
    with open(paths["cdf.svg"], "w") as fh:
        fh.write(svg)
    return paths


def characterization_summary(ch: Characterization) -> dict:
    ratios = [p.r_hrs / p.r_lrs for p in ch.devices]
    return {
        "devices": ch.n_devices,
        "cycles": ch.n_cycles,
        "hrs_samples": int(ch.hrs.size),
        "lrs_samples": int(ch.lrs.size),
        "hrs_min_ohm": float(ch.hrs.min()),
        "hrs_max_ohm": float(ch.hrs.max()),
        "lrs_min_ohm": float(ch.lrs.min()),
        "lrs_max_ohm": float(ch.lrs.max()),
        "device_ratio_min": min(ratios),
        "device_ratio_max": max(ratios),
    }


@dataclass
class YieldReport:
    n_sets: int
    seed: int
    passed_sets: int
    case_pass: dict[str, int] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)

    @property
    def yield_fraction(self) -> float:
        return self.passed_sets / self.n_sets

    def as_dict(self) -> dict:
        return {
            "sets": self.n_sets,
            "seed": self.seed,
            "passed_sets": self.passed_sets,
            "yield": self.yield_fraction,
            "case_pass_rate": {k: v / self.n_sets for k, v in self.case_pass.items()},
            "failures": self.failures,
        }

    def format(self) -> str:
        lines = [f"gate yield over {self.n_sets} device sets (seed {self.seed}): "
                 f"{self.passed_sets}/{self.n_sets} = {100 * self.yield_fraction:.1f}%"]
        for k, v in self.case_pass.items():
            lines.append(f"  {k:<7} {v:>4}/{self.n_sets}")
        return "\n".join(lines)


def gate_yield(
    n_sets: int,
    spec: VariabilitySpec,
    base: DeviceParams | None = None,
    transistor: TransistorParams | None = None,
    geometry: ArrayGeometry | None = None,
    proto: Protocols = DEFAULT,
) -> YieldReport:
    """Run all six OR/NOT cases on ``n_sets`` independently sampled arrays.

    Set ``s`` uses the variability seed ``spec.seed + s``. A set passes when
    every case gives the ideal output.
    """
    if n_sets < 1:
        raise ValueError("need at least one device set")
    cases = [(k, b) for k in ("or", "not") for b in gate_input_space(k)]
    report = YieldReport(n_sets, spec.seed, 0, {f"{k} {''.join(map(str, b))}": 0 for k, b in cases})
    for s in range(n_sets):
        set_spec = VariabilitySpec(spec.hrs_log_mean, spec.hrs_log_sigma, spec.c2c_sigma, spec.seed + s)
        all_ok = True
        for kind, bits in cases:
            state = build_array(geometry, set_spec, base, transistor)
            name = f"{kind} {''.join(map(str, bits))}"
            try:
                tc = run_gate_case(kind, state, bits, proto=proto)
            except ProtocolError as exc:
                # an init that did not take leaves the gate unusable
                all_ok = False
                report.failures.append({"set": s, "case": name, "expected": None, "observed": None,
                                        "reason": str(exc)})
                continue
            if tc.ok:
                report.case_pass[name] += 1
            else:
                all_ok = False
                report.failures.append({"set": s, "case": name, "expected": tc.expected, "observed": tc.output,
                                        "reason": "wrong output"})
        report.passed_sets += all_ok
    return report
