"""magicsim command line.

Exit codes: 0 success (and, for gate/run, the simulated result matches the
ideal one), 1 runtime failure or mismatch, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys

from . import __version__
from .config import ConfigError, dump_config, load_config
from .crossbar import build_array
from .device import VariabilitySpec
from .energy import FULL, MODES, OPTIMAL, or_energy_table, simulated_or_exec
from .limc import (
    MappingError, ParseError, Schedule, ScheduleError, allocate_and_emit, evaluate_expr, lower_to_or_not,
    parse_expr, simulate_schedule, variables,
)
from .limc.mapper import check_schedule
from .magic import NOT_CELLS, OR_CELLS, CalibrationError, ExecNot, ExecOr, Init, Read, calibrate_margins
from .variability import characterization_summary, characterize, gate_yield, write_characterization

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), "schemas")


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")


def _modes(mode: str):
    return MODES if mode == "both" else (mode,)


def _parse_bits(text: str, kind: str) -> tuple[int, ...]:
    want = 2 if kind == "or" else 1
    if not re.fullmatch(r"[01]+", text or "") or len(text) != want:
        raise UsageError(f"{kind} takes exactly {want} input bit(s) as 0/1 digits, got {text!r}")
    return tuple(int(c) for c in text)


def _parse_assign(text: str | None) -> dict[str, int]:
    out = {}
    if not text:
        return out
    for part in text.split(","):
        name, eq, val = part.partition("=")
        name, val = name.strip(), val.strip()
        if not eq or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or val not in ("0", "1"):
            raise UsageError(f"bad assignment {part!r}; expected name=0 or name=1")
        if name in out:
            raise UsageError(f"{name} assigned twice")
        out[name] = int(val)
    return out


def _breakdowns(run, modes) -> dict:
    return {m: {"fine": run.fine[m].as_dict(), "coarse": run.coarse[m].as_dict()} for m in modes}


def _print_breakdowns(run, modes) -> None:
    for m in modes:
        for label, b in (("sim", run.fine[m]), ("coarse", run.coarse[m])):
            p = b.percentages()
            print(f"  {m:<7} {label:<6} init {b.init_nj:10.3f} nJ ({p.init:5.1f}%)  exec {b.exec_nj:9.3f} nJ "
                  f"({p.exec:5.1f}%)  read {b.read_nj:7.3f} nJ ({p.read:5.2f}%)  total {b.total_nj:10.3f} nJ")


# ---------------------------------------------------------------- commands


def cmd_gate(args, cfg) -> int:
    bits = _parse_bits(args.inputs, args.kind)
    if args.kind == "or":
        *ins, out = OR_CELLS
        ops = [Init(c, b) for c, b in zip(ins, bits)] + [Init(out, 0), ExecOr(tuple(ins), out)]
        expected = int(any(bits))
        readable = list(ins)
    else:
        x1, x_in, out = NOT_CELLS
        ops = [Init(x1, 1), Init(x_in, bits[0]), Init(out, 0), ExecNot(x1, x_in, out)]
        expected = 1 - bits[0]
        readable = [x_in]
    ops += [Read(c) for c in readable] + [Read(out)]
    sched = Schedule([], ops, out)
    state = build_array(cfg.geometry, VariabilitySpec.nominal(cfg.device), cfg.device, cfg.transistor)
    run = simulate_schedule(sched, {}, state, cfg.protocol, cfg.costs, cfg.device, keep_traces=bool(args.out))
    paths = []
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for k, name, trace in run.traces:
            path = os.path.join(args.out, f"{k:02d}_{name}.csv")
            trace.to_csv(path)
            paths.append(path)
    modes = _modes(args.mode)
    ok = run.output == expected
    if args.json:
        _emit({
            "gate": args.kind,
            "inputs": "".join(map(str, bits)),
            "output": run.output,
            "expected": expected,
            "match": ok,
            "reads": [{"cell": list(r.cell), "logic": r.logic, "current_a": r.current_a} for r in run.reads],
            "energy": _breakdowns(run, modes),
            "traces": paths,
        })
    else:
        print(f"{args.kind.upper()}({','.join(map(str, bits))}) = {run.output} (expected {expected}) "
              f"{'OK' if ok else 'MISMATCH'}")
        for r in run.reads:
            print(f"  read {r.cell.name}: logic {r.logic}, {r.current_a * 1e6:.3f} uA")
        _print_breakdowns(run, modes)
        for p in paths:
            print(f"  trace {p}")
    return 0 if ok else 1


def _schedule_from_args(args, cfg):
    if args.schedule:
        try:
            sched = Schedule.from_json(args.schedule)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot load schedule {args.schedule}: {exc}") from None
        try:
            check_schedule(sched, cfg.geometry)
        except ScheduleError as exc:
            raise UsageError(f"invalid schedule: {exc}") from None
        expr = parse_expr(sched.expr) if sched.expr else None
        return sched, expr
    if not args.expr:
        raise UsageError("give an expression or --schedule FILE")
    expr = parse_expr(args.expr)
    sched = allocate_and_emit(lower_to_or_not(expr), variables(expr), cfg.geometry, cfg.max_or_fanin)
    return sched, expr


def cmd_run(args, cfg) -> int:
    if args.expr and args.schedule:
        raise UsageError("give either an expression or --schedule, not both")
    assignment = _parse_assign(args.assign)
    try:
        sched, expr = _schedule_from_args(args, cfg)
    except ParseError as exc:
        raise UsageError(f"parse error: {exc}") from None
    missing = [v for v in sched.inputs if v not in assignment]
    extra = [v for v in assignment if v not in sched.inputs]
    if missing or extra:
        raise UsageError(f"assignment must cover exactly the inputs {sched.inputs}"
                         + (f"; missing {missing}" if missing else "") + (f"; unknown {extra}" if extra else ""))
    if args.emit_schedule:
        sched.to_json(args.emit_schedule)
    run = simulate_schedule(sched, assignment, None, cfg.protocol, cfg.costs, cfg.device,
                            cfg.geometry, cfg.transistor)
    expected = evaluate_expr(expr, assignment) if expr is not None else None
    ok = expected is None or run.output == expected
    modes = _modes(args.mode)
    counts = {k: sched.count(k) for k in ("init", "exec_or", "exec_not", "read")}
    if args.json:
        _emit({
            "expr": sched.expr,
            "assignment": assignment,
            "output": run.output,
            "expected": expected,
            "match": ok,
            "op_counts": counts,
            "switch_events": run.events,
            "energy": _breakdowns(run, modes),
            "schedule": args.emit_schedule,
        })
    else:
        print(f"{sched.expr or '<schedule>'} with {assignment or '{}'} -> {run.output}"
              + ("" if expected is None else f" (expected {expected}) {'OK' if ok else 'MISMATCH'}"))
        print("  ops: " + ", ".join(f"{v} {k}" for k, v in counts.items()))
        _print_breakdowns(run, modes)
        if args.emit_schedule:
            print(f"  schedule written to {args.emit_schedule}")
    return 0 if ok else 1


def cmd_energy_table(args, cfg) -> int:
    sim = simulated_or_exec(cfg.protocol, cfg.device, cfg.transistor, cfg.geometry)
    rows = or_energy_table(cfg.costs, sim, _modes(args.mode))
    if args.json:
        _emit({"rows": [r.as_dict() for r in rows]})
        return 0
    print("inputs mode     init_nJ  read_nJ  exec_meas  exec_sim  %init(meas-exec)  %init(sim-exec)  "
          "%read(sim-exec)  reported %init/%read")
    for r in rows:
        print(f"{r.inputs:<6} {r.mode:<8} {r.init_nj:7.0f} {r.read_nj:8.3f} {r.exec_measured_nj:11.0f} {r.exec_sim_nj:9.2f} "
              f"{r.init_pct_measured_exec:18.2f} {r.init_pct_sim_exec:16.2f} {r.read_pct_sim_exec:16.4f}  "
              f"{r.reported_init_pct:g}/{r.reported_read_pct:g}")
    print("init/read: cost table; exec_meas: measured values; exec_sim: this simulator")
    return 0


def cmd_calibrate(args, cfg) -> int:
    try:
        rep = calibrate_margins(cfg.device, cfg.transistor, cfg.geometry, cfg.protocol, strict=False)
    except CalibrationError as exc:  # pragma: no cover - strict=False never raises
        print(exc, file=sys.stderr)
        return 1
    if args.json:
        _emit({"ok": rep.ok, "cases": [c.as_dict() for c in rep.cases]})
    else:
        print(rep.format())
        print("all cases OK" if rep.ok else "nominal truth table VIOLATED")
    return 0 if rep.ok else 1


def cmd_characterize(args, cfg) -> int:
    if args.devices < 1 or args.cycles < 1:
        raise UsageError("--devices and --cycles must be positive")
    v = cfg.variability
    spec = VariabilitySpec(v.hrs_log_mean, v.hrs_log_sigma, v.c2c_sigma, args.seed if args.seed is not None else v.seed)
    ch = characterize(args.devices, args.cycles, spec, cfg.device)
    paths = write_characterization(ch, args.out)
    summary = characterization_summary(ch) | {"seed": spec.seed, "files": paths}
    if args.json:
        _emit(summary)
    else:
        print(f"{ch.n_devices} devices x {ch.n_cycles} cycles (seed {spec.seed})")
        print(f"  HRS {summary['hrs_min_ohm']:.4g} .. {summary['hrs_max_ohm']:.4g} ohm; "
              f"LRS {summary['lrs_min_ohm']:.4g} .. {summary['lrs_max_ohm']:.4g} ohm")
        for p in paths.values():
            print(f"  wrote {p}")
    return 0


def cmd_yield(args, cfg) -> int:
    if args.sets < 1:
        raise UsageError("--sets must be positive")
    v = cfg.variability
    spec = VariabilitySpec(v.hrs_log_mean, v.hrs_log_sigma, v.c2c_sigma, args.seed if args.seed is not None else v.seed)
    rep = gate_yield(args.sets, spec, cfg.device, cfg.transistor, cfg.geometry, cfg.protocol)
    if args.json:
        _emit(rep.as_dict())
    else:
        print(rep.format())
    return 0


def cmd_config(args, cfg) -> int:
    sys.stdout.write(dump_config(cfg))
    return 0


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magicsim", description="MAGIC stateful logic on a simulated 1T1R RRAM crossbar")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="key=value config file (default: $MAGICSIM_CONFIG)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gate", help="run one OR/NOT evaluation with full initialization")
    g.add_argument("kind", choices=("or", "not"))
    g.add_argument("--inputs", required=True, help="input bits, e.g. 10 for OR or 1 for NOT")
    g.add_argument("--mode", choices=(FULL, OPTIMAL, "both"), default="both")
    g.add_argument("--out", help="directory for per-op trace CSVs")
    g.add_argument("--json", action="store_true")
    g.set_defaults(func=cmd_gate)

    r = sub.add_parser("run", help="compile and simulate a Boolean expression")
    r.add_argument("expr", nargs="?", help='expression, e.g. "a & !b"')
    r.add_argument("--schedule", help="replay a schedule JSON instead of compiling")
    r.add_argument("--assign", help="input values, e.g. a=1,b=0")
    r.add_argument("--emit-schedule", metavar="FILE", help="write the schedule JSON here")
    r.add_argument("--mode", choices=(FULL, OPTIMAL, "both"), default="both")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("energy-table", help="initialization/exec/read energy comparison for the four OR inputs")
    t.add_argument("--mode", choices=(FULL, OPTIMAL, "both"), default="both")
    t.add_argument("--json", action="store_true")
    t.set_defaults(func=cmd_energy_table)

    c = sub.add_parser("calibrate", help="threshold margins of all six gate cases at nominal parameters")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_calibrate)

    ch = sub.add_parser("characterize", help="Monte Carlo D2D/C2C resistance statistics")
    ch.add_argument("--devices", type=int, default=17)
    ch.add_argument("--cycles", type=int, default=100)
    ch.add_argument("--seed", type=int)
    ch.add_argument("--out", default="characterize_out")
    ch.add_argument("--json", action="store_true")
    ch.set_defaults(func=cmd_characterize)

    y = sub.add_parser("yield", help="gate yield over sampled device sets")
    y.add_argument("--sets", type=int, default=100)
    y.add_argument("--seed", type=int)
    y.add_argument("--json", action="store_true")
    y.set_defaults(func=cmd_yield)

    cf = sub.add_parser("config", help="print the effective configuration")
    cf.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"magicsim {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (MappingError, ScheduleError) as exc:
        print(f"magicsim {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"magicsim {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
