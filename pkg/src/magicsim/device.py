"""Behavioral 1T1R device model: one TaOx memristor behind an access transistor.

Switching is abrupt and event based. A device is either in HRS (logic 0) or
LRS (logic 1); resistance values wander around the nominal ones through
device-to-device sampling and cycle-to-cycle jitter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HRS_MIN_OHM = 1e5
HRS_MAX_OHM = 1e6
HRS_LRS_RATIO = 10


@dataclass(frozen=True)
class DeviceParams:
    r_hrs: float = 200e3
    r_lrs: float = 20e3
    v_set_th: float = 1.1
    v_reset_th: float = 1.7
    i_hold: float = 32e-6
    i_reset_min: float = 80e-6

    def __post_init__(self):
        for name in ("r_hrs", "r_lrs", "v_set_th", "v_reset_th", "i_hold", "i_reset_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.r_hrs / self.r_lrs != HRS_LRS_RATIO:
            raise ValueError(
                f"r_hrs/r_lrs must be exactly {HRS_LRS_RATIO}, got {self.r_hrs / self.r_lrs!r}"
            )

    @property
    def read_threshold(self) -> float:
        """Geometric mean of the two nominal states."""
        return math.sqrt(self.r_hrs * self.r_lrs)


@dataclass(frozen=True)
class TransistorParams:
    v_gate_on: float = 0.7
    r_on: float = 1e3
    compliance: tuple[tuple[float, float], ...] = ((1.6, 500e-6), (5.0, 2e-3))

    def __post_init__(self):
        if not self.r_on > 0:
            raise ValueError("r_on must be positive")
        if not self.compliance:
            raise ValueError("compliance table is empty")
        gates = [g for g, _ in self.compliance]
        currents = [i for _, i in self.compliance]
        if gates != sorted(gates) or len(set(gates)) != len(gates):
            raise ValueError("compliance gate voltages must be strictly increasing")
        if any(b < a for a, b in zip(currents, currents[1:])) or min(currents) <= 0:
            raise ValueError("compliance currents must be positive and non-decreasing")

    def compliance_current(self, v_gate):
        """Saturation current at the given gate voltage(s), clamped at the table ends."""
        gates, currents = zip(*self.compliance)
        return np.interp(v_gate, gates, currents)


@dataclass(frozen=True)
class VariabilitySpec:
    """Lognormal device-to-device HRS spread plus cycle-to-cycle jitter.

    The defaults describe the spread used for characterization runs. Gate
    calibration uses :meth:`nominal`, which has no variance at all.
    """

    hrs_log_mean: float = math.log(math.sqrt(HRS_MIN_OHM * HRS_MAX_OHM))
    hrs_log_sigma: float = 0.75
    c2c_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.hrs_log_sigma < 0 or self.c2c_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if not math.isfinite(self.hrs_log_mean):
            raise ValueError("hrs_log_mean must be finite")

    @classmethod
    def nominal(cls, params: DeviceParams | None = None, seed: int = 0) -> "VariabilitySpec":
        params = params or DeviceParams()
        return cls(math.log(params.r_hrs), 0.0, 0.0, seed)


@dataclass
class DeviceState:
    """Mutable per-run state of one cell. Logic is always derived from resistance."""

    params: DeviceParams
    resistance: float
    cycle_count: int = 0
    pristine: bool = False

    def __post_init__(self):
        if not self.resistance > 0:
            raise ValueError("resistance must be positive")

    @property
    def logic(self) -> int:
        return logic_of_resistance(self.resistance, self.params)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, *key])


def sample_device(spec: VariabilitySpec, index: int, base: DeviceParams | None = None) -> DeviceParams:
    """Draw the parameters of device ``index``; pure in ``(spec.seed, index)``.

    Random draws are clipped to the measured HRS range and quantized to
    whole ohms on the LRS side so that the HRS/LRS ratio is exactly 10 in
    floating point.
    """
    base = base or DeviceParams()
    if spec.hrs_log_sigma == 0:
        # no spread: the configured device as is, without range clipping
        r_hrs = math.exp(spec.hrs_log_mean)
        if math.isclose(r_hrs, base.r_hrs, rel_tol=1e-12):
            return base
    else:
        z = _rng(spec.seed, index, 0).standard_normal()
        r_hrs = math.exp(spec.hrs_log_mean + spec.hrs_log_sigma * z)
        r_hrs = min(max(r_hrs, HRS_MIN_OHM), HRS_MAX_OHM)
    r_lrs = float(round(r_hrs / HRS_LRS_RATIO))
    return DeviceParams(
        r_hrs=r_lrs * HRS_LRS_RATIO,
        r_lrs=r_lrs,
        v_set_th=base.v_set_th,
        v_reset_th=base.v_reset_th,
        i_hold=base.i_hold,
        i_reset_min=base.i_reset_min,
    )


def c2c_resistance(params: DeviceParams, logic: int, spec: VariabilitySpec, index: int, cycle: int) -> float:
    """Resistance after a committed transition into ``logic`` on the given cycle."""
    nominal = params.r_lrs if logic else params.r_hrs
    if spec.c2c_sigma == 0:
        return nominal
    z = _rng(spec.seed, index, cycle + 1).standard_normal()
    r = nominal * math.exp(spec.c2c_sigma * z)
    if logic:
        return min(max(r, HRS_MIN_OHM / HRS_LRS_RATIO), HRS_MAX_OHM / HRS_LRS_RATIO)
    return min(max(r, HRS_MIN_OHM), HRS_MAX_OHM)


def logic_of_resistance(r: float, params: DeviceParams) -> int:
    if not r > 0:
        raise ValueError(f"resistance must be positive, got {r!r}")
    return 1 if r < params.read_threshold else 0


def set_event_check(v_device: float, i_post_switch: float, params: DeviceParams) -> bool:
    """SET commits only if the voltage is high enough and the network can hold the LRS current."""
    return v_device >= params.v_set_th and i_post_switch >= params.i_hold


def reset_event_check(v_reverse: float, i_reverse: float, params: DeviceParams) -> bool:
    """RESET test on reverse-polarity magnitudes (SL above BL gives positive values)."""
    return v_reverse >= params.v_reset_th and i_reverse >= params.i_reset_min


def set_margin(v_device: float, i_post_switch: float, params: DeviceParams) -> float:
    """Smallest relative headroom over the two SET conditions (negative = no SET)."""
    return min(
        (v_device - params.v_set_th) / params.v_set_th,
        (i_post_switch - params.i_hold) / params.i_hold,
    )


def reset_margin(v_reverse: float, i_reverse: float, params: DeviceParams) -> float:
    return min(
        (v_reverse - params.v_reset_th) / params.v_reset_th,
        (i_reverse - params.i_reset_min) / params.i_reset_min,
    )


@dataclass
class CycleRecord:
    hrs: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)


def cycle_device(params: DeviceParams, spec: VariabilitySpec, index: int, cycles: int) -> CycleRecord:
    """Statistical SET/RESET cycling of one device: one LRS and one HRS value per cycle."""
    rec = CycleRecord()
    for m in range(cycles):
        rec.lrs.append(c2c_resistance(params, 1, spec, index, 2 * m))
        rec.hrs.append(c2c_resistance(params, 0, spec, index, 2 * m + 1))
    return rec
