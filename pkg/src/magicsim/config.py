"""key=value configuration files with dotted section keys.

Lines look like ``device.r_hrs_ohm = 250e3``; ``#`` starts a comment. Every
key maps onto one field of a parameter dataclass, and the dataclasses
validate their own invariants when the config is assembled.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .crossbar import ArrayGeometry
from .device import DeviceParams, TransistorParams, VariabilitySpec
from .energy import CostTable
from .magic import Protocols

ENV_VAR = "MAGICSIM_CONFIG"


class ConfigError(ValueError):
    pass


def _compliance(text: str):
    pts = []
    for part in text.split(","):
        g, _, i = part.partition(":")
        if not _:
            raise ConfigError(f"compliance entry {part!r} is not gate_v:current_a")
        pts.append((float(g), float(i)))
    return tuple(pts)


def _int(text: str) -> int:
    return int(text, 10)


# key -> (section, field, parser)
KEYS = {
    "device.r_hrs_ohm": ("device", "r_hrs", float),
    "device.r_lrs_ohm": ("device", "r_lrs", float),
    "device.v_set_th_v": ("device", "v_set_th", float),
    "device.v_reset_th_v": ("device", "v_reset_th", float),
    "device.i_hold_a": ("device", "i_hold", float),
    "device.i_reset_min_a": ("device", "i_reset_min", float),
    "transistor.v_gate_on_v": ("transistor", "v_gate_on", float),
    "transistor.r_on_ohm": ("transistor", "r_on", float),
    "transistor.compliance": ("transistor", "compliance", _compliance),
    "variability.hrs_log_mean": ("variability", "hrs_log_mean", float),
    "variability.hrs_log_sigma": ("variability", "hrs_log_sigma", float),
    "variability.c2c_sigma": ("variability", "c2c_sigma", float),
    "variability.seed": ("variability", "seed", _int),
    "array.rows": ("array", "rows", _int),
    "array.cols": ("array", "cols", _int),
    "sim.steps": ("protocol", "steps", _int),
    "sim.dt_s": ("protocol", "dt", float),
    "compiler.max_or_fanin": ("compiler", "max_or_fanin", _int),
}
for _f in fields(Protocols):
    if _f.name in ("steps", "dt"):
        continue
    suffix = "_s" if _f.name.endswith("duration") else ""
    KEYS[f"protocol.{_f.name}{suffix}"] = ("protocol", _f.name, float)
for _f in fields(CostTable):
    suffix = "_s" if _f.name.endswith("duration") else "_nj"
    KEYS[f"energy.{_f.name}{suffix}"] = ("energy", _f.name, float)


@dataclass
class Config:
    device: DeviceParams = field(default_factory=DeviceParams)
    transistor: TransistorParams = field(default_factory=TransistorParams)
    variability: VariabilitySpec = field(default_factory=VariabilitySpec)
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    protocol: Protocols = field(default_factory=Protocols)
    costs: CostTable = field(default_factory=CostTable)
    max_or_fanin: int = 2
    source: str | None = None

    def __post_init__(self):
        if self.max_or_fanin < 1:
            raise ConfigError("compiler.max_or_fanin must be >= 1")


def parse_config(text: str, source: str = "<string>") -> Config:
    values: dict[str, dict] = {}
    seen = set()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not eq or not key:
            raise ConfigError(f"{source}:{n}: expected key = value")
        if key not in KEYS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        seen.add(key)
        section, name, conv = KEYS[key]
        try:
            values.setdefault(section, {})[name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{n}: bad value for {key}: {exc}") from None
    try:
        cfg = Config(
            device=DeviceParams(**values.get("device", {})),
            transistor=TransistorParams(**values.get("transistor", {})),
            variability=VariabilitySpec(**values.get("variability", {})),
            geometry=ArrayGeometry(**values.get("array", {})),
            protocol=Protocols(**values.get("protocol", {})),
            costs=CostTable(**values.get("energy", {})),
            max_or_fanin=values.get("compiler", {}).get("max_or_fanin", 2),
            source=source,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path: str | None = None) -> Config:
    """Load ``path``, else the file named by $MAGICSIM_CONFIG, else defaults."""
    path = path or os.environ.get(ENV_VAR) or None
    if path is None:
        return Config()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


def dump_config(cfg: Config) -> str:
    """Render every key with its effective value; the output parses back to ``cfg``."""
    sections = {"device": cfg.device, "transistor": cfg.transistor, "variability": cfg.variability,
                "array": cfg.geometry, "protocol": cfg.protocol, "energy": cfg.costs}
    lines = []
    for key, (section, name, _) in KEYS.items():
        if section == "compiler":
            v = cfg.max_or_fanin
        else:
            v = getattr(sections[section], name)
        if v is None:
            continue
        if name == "compliance":
            v = ",".join(f"{g!r}:{i!r}" for g, i in v)
        lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
    return "\n".join(lines) + "\n"
