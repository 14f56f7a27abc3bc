import math

import numpy as np
import pytest

from magicsim.crossbar import GROUNDED, ArrayGeometry, LineDrive, Waveform, build_array, run_transient
from magicsim.device import DeviceParams, VariabilitySpec
from magicsim.energy import (
    FULL, OPTIMAL, CostTable, EnergyBreakdown, PhaseWindow, breakdown_percentages, coarse_cost, detect_optimal_window,
    full_window, integrate_energy, or_energy_table, or_gate_ops, pwl_product_integral,
)
from magicsim.magic import OR_CELLS, ExecOr, Init, Read, init_cell


def ramp_trace(v, T, r, steps=2000):
    p = DeviceParams(r_hrs=r, r_lrs=r / 10)
    s = build_array(ArrayGeometry(1, 1), VariabilitySpec.nominal(p), p)
    s.set_drive("WL1", LineDrive.driven(Waveform.dc(3.3, T)))
    s.set_drive("BL1", LineDrive.driven(Waveform.triangle(v, T)))
    s.set_drive("SL1", GROUNDED)
    return run_transient(s, T, T / steps)


def test_triangle_over_resistor_closed_form():
    tr = ramp_trace(0.5, 4e-3, 200e3)
    assert not tr.events
    want = 0.5 ** 2 * 4e-3 / (3 * (200e3 + 1e3)) * 1e9
    assert integrate_energy(tr) == pytest.approx(want, rel=1e-9)
    # the device alone sees its share of the divider
    dev = integrate_energy(tr, cells=[(0, 0)])
    assert dev == pytest.approx(want * 200 / 201, rel=1e-9)


def test_closed_form_example_value():
    t = np.linspace(0, 4e-3, 2001)
    v = np.interp(t, [0, 2e-3, 4e-3], [0, 2.0, 0])
    e = pwl_product_integral(t, v, v / 500e3, 0, 4e-3)
    assert e * 1e9 == pytest.approx(10.667, abs=1e-3)


def test_pwl_integral_exact_for_quadratic_on_subwindow():
    t = np.linspace(0, 1, 11)
    v, i = 2 * t, 3 * t  # product 6 t^2
    assert pwl_product_integral(t, v, i, 0.25, 0.75) == pytest.approx(2 * (0.75 ** 3 - 0.25 ** 3), rel=1e-12)
    assert pwl_product_integral(t, v, i, 0.5, 0.5) == 0.0


def test_window_validation():
    tr = ramp_trace(0.5, 1e-3, 200e3, steps=100)
    assert full_window(tr).t_end == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        PhaseWindow(2e-3, 1e-3)
    with pytest.raises(ValueError):
        integrate_energy(tr, PhaseWindow(0.0, 2e-3))


def test_optimal_window_brackets_the_event(nominal):
    tr = init_cell(nominal, (0, 0), 1)
    ev = tr.events[0]
    w = detect_optimal_window(tr, (0, 0))
    assert w.t_start <= ev.t < w.t_end
    assert w.t_end == pytest.approx(ev.t + 10 * tr.dt)
    assert integrate_energy(tr, w) < integrate_energy(tr)


def test_no_event_window_is_narrow():
    tr = ramp_trace(0.5, 1e-3, 200e3)
    w = detect_optimal_window(tr, (0, 0))
    assert w.how == "peak" and w.t_end - w.t_start == pytest.approx(20 * tr.dt)


def test_cost_table_lookup_and_validation():
    t = CostTable()
    assert t.init_cost(1, FULL) == 312 and t.init_cost(0, FULL) == 1300
    assert t.init_cost(1, OPTIMAL) == 274 and t.init_cost(0, OPTIMAL) == 232
    with pytest.raises(ValueError):
        t.init_cost(1, "fast")
    with pytest.raises(ValueError):
        CostTable(set_opt=400.0)
    with pytest.raises(ValueError):
        CostTable(read_lrs=-1.0)


@pytest.mark.parametrize("bits,full,opt", [("00", 3900, 696), ("01", 2912, 738), ("10", 2912, 738), ("11", 1924, 780)])
def test_init_totals(bits, full, opt):
    ops = or_gate_ops(bits)
    assert coarse_cost(ops, {}, CostTable(), FULL).init_nj == full
    assert coarse_cost(ops, {}, CostTable(), OPTIMAL).init_nj == opt


def test_coarse_tracks_late_bound_targets():
    a, b, c = OR_CELLS
    ops = [Init(a, "x"), Init(b, 0), Init(c, 0), ExecOr((a, b), c), Read(c, "n0"), Init(a, "@n0"), Read(a)]
    out = coarse_cost(ops, {"x": 1}, CostTable(), FULL, [7.0])
    assert out.init_nj == 312 + 1300 + 1300 + 312
    assert out.read_nj == pytest.approx(2 * 5.4)
    assert out.exec_nj == 7.0
    with pytest.raises(ValueError):
        coarse_cost(ops, {"x": 1}, CostTable(), FULL, [1.0, 2.0])
    with pytest.raises(TypeError):
        coarse_cost([object()], {}, CostTable(), FULL)


def test_percentages_and_zero_total():
    p = breakdown_percentages((90.0, 9.0, 1.0))
    assert (p.init, p.exec, p.read) == pytest.approx((90, 9, 1))
    z = breakdown_percentages(EnergyBreakdown(FULL))
    assert z.zero_total and z.init == 0
    with pytest.raises(ValueError):
        EnergyBreakdown(FULL).add(0, "set", "init", -1.0, "sim")


def test_breakdown_exports(tmp_path):
    b = coarse_cost(or_gate_ops("01"), {}, CostTable(), FULL, 100.0)
    b.to_csv(tmp_path / "b.csv")
    b.to_json(tmp_path / "b.json")
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "index,op,phase,nJ,source,mode" and len(rows) == len(b.items) + 1
    assert math.isclose(b.as_dict()["total_nJ"], b.total_nj)


def test_table_rows_without_simulation():
    sim = {m: {k: 1.0 for k in ("00", "01", "10", "11")} for m in (FULL, OPTIMAL)}
    rows = or_energy_table(sim_exec=sim)
    assert [(r.mode, r.inputs) for r in rows][:4] == [(FULL, "00"), (FULL, "01"), (FULL, "10"), (FULL, "11")]
    assert rows[0].init_nj == 3900 and rows[7].init_nj == 780
    assert rows[0].provenance["exec_measured_nj"] == "measured"
