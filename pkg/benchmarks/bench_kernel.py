"""Compiled vs pure-Python stepping kernel on the shipped gate scenarios.

    python benchmarks/bench_kernel.py [--repeat N]

Each scenario is run on both backends from identical starting states; the
traces are compared before any timing is reported.
"""
import argparse
import time

import numpy as np

from magicsim import _backend
from magicsim.crossbar import build_array
from magicsim.magic import NOT_CELLS, OR_CELLS, protocol_not, protocol_or, protocol_reset, protocol_set, run_protocol


def scenarios():
    x1, x2, out = OR_CELLS
    yield "set", [], protocol_set(x1)
    yield "reset", [x1], protocol_reset(x1)
    yield "or 01", [x2], protocol_or([x1, x2], out)
    yield "or 11", [x1, x2], protocol_or([x1, x2], out)
    a, b, y = NOT_CELLS
    yield "not 0", [a], protocol_not(a, b, y)


def run(kernel, lrs, spec):
    state = build_array()
    for c in lrs:
        d = state.device(c)
        d.resistance = d.params.r_lrs
    saved = _backend.kernel
    _backend.kernel = kernel
    try:
        t0 = time.perf_counter()
        trace = run_protocol(state, spec)
        return trace, time.perf_counter() - t0
    finally:
        _backend.kernel = saved


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _backend.compiled is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    print(f"{'scenario':<8} {'steps':>6} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max |dI| A':>11}")
    total_py = total_cy = 0.0
    for name, lrs, spec in scenarios():
        tr_py, _ = run(_backend.pure, lrs, spec)
        tr_cy, _ = run(_backend.compiled, lrs, spec)
        if [e.as_dict() for e in tr_py.events] != [e.as_dict() for e in tr_cy.events]:
            raise SystemExit(f"{name}: backends disagree on switch events")
        err = float(np.nanmax(np.abs(tr_py.currents - tr_cy.currents)))
        py = min(run(_backend.pure, lrs, spec)[1] for _ in range(args.repeat))
        cy = min(run(_backend.compiled, lrs, spec)[1] for _ in range(args.repeat))
        total_py += py
        total_cy += cy
        print(f"{name:<8} {len(tr_cy.t):>6} {py * 1e3:10.2f} {cy * 1e3:10.3f} {py / cy:8.1f} {err:11.2e}")
    print(f"{'total':<8} {'':>6} {total_py * 1e3:10.2f} {total_cy * 1e3:10.3f} {total_py / total_cy:8.1f}")


if __name__ == "__main__":
    main()
