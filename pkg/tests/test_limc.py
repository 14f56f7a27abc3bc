import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magicsim.crossbar import ArrayGeometry, CellAddress
from magicsim.limc import (
    And, MappingError, Not, Or, ParseError, Schedule, ScheduleError, UnboundVariableError, Var, Xor,
    allocate_and_emit, check_schedule, compile_expr, depth, evaluate_expr, gate_counts, is_lowered,
    lower_to_or_not, parse_expr, simulate_schedule, to_text, variables,
)
from magicsim.magic import ExecNot, ExecOr, Init, Read

a, b, c = Var("a"), Var("b"), Var("c")

names = st.sampled_from(["a", "b", "c", "d"])
exprs = st.recursive(
    names.map(Var),
    lambda kids: st.one_of(
        kids.map(Not),
        st.tuples(kids, kids).map(lambda t: Or(*t)),
        st.tuples(kids, kids).map(lambda t: And(*t)),
        st.tuples(kids, kids).map(lambda t: Xor(*t)),
    ),
    max_leaves=12,
)


def assignments(vs):
    for bits in itertools.product((0, 1), repeat=len(vs)):
        yield dict(zip(vs, bits))


# ---------------------------------------------------------------- parsing


@pytest.mark.parametrize("text,tree", [
    ("a | b", Or(a, b)),
    ("!a & b", And(Not(a), b)),
    ("a | b & c", Or(a, And(b, c))),
    ("a ^ b & c", Xor(a, And(b, c))),
    ("a | b ^ c", Or(a, Xor(b, c))),
    ("~(a|b)", Not(Or(a, b))),
    ("a|b|c", Or(Or(a, b), c)),
    ("  !!a\t", Not(Not(a))),
    ("x_1 & _y", And(Var("x_1"), Var("_y"))),
])
def test_parse(text, tree):
    assert parse_expr(text) == tree


@pytest.mark.parametrize("text,offset,expect", [
    ("a |", 3, "identifier"),
    ("a b", 2, "end of input"),
    ("(a | b", 6, ")"),
    ("", 0, "identifier"),
    ("a & $", 4, "identifier"),
    ("é | a", 0, "identifier"),
    ("é | ", 0, "identifier"),
])
def test_parse_errors(text, offset, expect):
    with pytest.raises(ParseError) as ei:
        parse_expr(text)
    assert ei.value.offset == offset
    assert expect in ei.value.expected


def test_parse_error_offset_is_in_bytes():
    with pytest.raises(ParseError) as ei:
        parse_expr("(é_not_ascii")
    assert ei.value.offset == 1
    with pytest.raises(ParseError) as ei:
        parse_expr("a | b )")
    assert ei.value.offset == 6


def test_deep_nesting_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_expr("!" * 50000 + "a")


@settings(max_examples=200, deadline=None)
@given(exprs)
def test_print_parse_round_trip(e):
    assert parse_expr(to_text(e)) == e


def test_to_text_minimal_parens():
    assert to_text(Or(a, And(b, c))) == "a | b & c"
    assert to_text(And(Or(a, b), c)) == "(a | b) & c"
    assert to_text(Or(a, Or(b, c))) == "a | (b | c)"
    assert to_text(Not(Xor(a, b))) == "!(a ^ b)"


# ---------------------------------------------------------------- evaluation and lowering


def test_evaluate():
    assert evaluate_expr(Or(a, b), {"a": 1, "b": 0}) == 1
    assert evaluate_expr(Not(a), {"a": 1}) == 0
    assert evaluate_expr(Xor(a, b), {"a": 1, "b": 1}) == 0
    with pytest.raises(UnboundVariableError):
        evaluate_expr(And(a, b), {"a": 1})
    with pytest.raises(ValueError):
        Var("1x")


def test_lowering_rules():
    assert lower_to_or_not(And(a, b)) == Not(Or(Not(a), Not(b)))
    assert lower_to_or_not(Not(Not(a))) == a
    x = lower_to_or_not(Xor(a, b))
    assert is_lowered(x)
    for env in assignments(["a", "b"]):
        assert evaluate_expr(x, env) == env["a"] ^ env["b"]


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_lowering_is_sound(e):
    low = lower_to_or_not(e)
    assert is_lowered(low)
    assert "Not(Not(" not in repr(low)
    for env in assignments(variables(e)):
        assert evaluate_expr(low, env) == evaluate_expr(e, env)


def test_gate_counts_and_depth():
    low = lower_to_or_not(And(a, b))
    assert gate_counts(low) == {"or": 1, "not": 3}
    assert depth(low) == 3 and depth(a) == 0


# ---------------------------------------------------------------- mapping


def kinds(s):
    return [op.kind for op in s.ops]


def test_or_schedule_shape():
    s = compile_expr("a|b")
    assert kinds(s) == ["init", "init", "init", "exec_or", "read"]
    assert [op.target for op in s.ops[:3]] == ["a", "b", 0]
    assert s.ops[-1].cell == s.output_cell


def test_not_schedule_shape():
    s = compile_expr("!a")
    assert kinds(s) == ["init", "init", "init", "exec_not", "read"]
    assert [op.target for op in s.ops[:3]] == [1, "a", 0]
    x1, x_in, y = s.ops[3].cells
    assert (s.ops[0].cell, s.ops[1].cell, s.ops[2].cell) == (x1, x_in, y)


def test_and_schedule_gate_sequence():
    s = compile_expr("a&b")
    assert [k for k in kinds(s) if k.startswith("exec")] == ["exec_not", "exec_not", "exec_or", "exec_not"]


def test_every_exec_output_is_reset_first():
    s = compile_expr("(a ^ b) | !(c & d)")
    check_schedule(s)
    last = {}
    for op in s.ops:
        if isinstance(op, Init):
            last[op.cell] = op.target
        elif isinstance(op, (ExecOr, ExecNot)):
            out = op.cells[-1]
            assert last.get(out) == 0
            assert out not in op.cells[:-1]
            assert len({c.col for c in op.cells}) == 1
            last[out] = None


def test_spill_moves_values_between_columns():
    e = lower_to_or_not(parse_expr("a ^ b ^ c"))
    assert {op.cells[0].col for op in allocate_and_emit(e).ops} == {0}
    g = ArrayGeometry(4, 4)
    s = allocate_and_emit(e, geometry=g)
    assert len({op.cells[0].col for op in s.ops}) > 1
    assert any(isinstance(op, Init) and str(op.target).startswith("@") for op in s.ops)
    for env in assignments(["a", "b", "c"]):
        run = simulate_schedule(s, env, geometry=g, energy=False)
        assert run.output == env["a"] ^ env["b"] ^ env["c"]


def test_capacity_error_names_the_net():
    e = lower_to_or_not(parse_expr("(a ^ b) ^ (c ^ d)"))
    with pytest.raises(MappingError, match="net"):
        allocate_and_emit(e, geometry=ArrayGeometry(3, 1))


def test_mapping_preconditions():
    with pytest.raises(MappingError, match="not lowered"):
        allocate_and_emit(And(a, b))
    with pytest.raises(MappingError, match="undeclared"):
        allocate_and_emit(Or(a, b), ["a"])


def test_wide_or_flag():
    e = lower_to_or_not(parse_expr("a | b | c | d"))
    two = allocate_and_emit(e)
    four = allocate_and_emit(e, max_fanin=4)
    assert two.count("exec_or") == 3 and four.count("exec_or") == 1
    assert len(next(op for op in four.ops if isinstance(op, ExecOr)).inputs) == 4


def test_checker_rejects_bad_schedules():
    c0, c1, c2 = CellAddress(0, 0), CellAddress(1, 0), CellAddress(2, 0)
    bad = [
        [Init(c0, "a"), ExecOr((c0, c1), c2), Read(c2)],  # c1 unwritten
        [Init(c0, "a"), Init(c1, "a"), ExecOr((c0, c1), c2), Read(c2)],  # output never reset
        [Init(c0, 0), Init(c1, "a"), Init(c2, 0), ExecNot(c0, c1, c2), Read(c2)],  # helper holds 0
        [Init(c0, "z"), Read(c0)],  # undeclared input
        [Init(c0, "@n9"), Read(c0)],  # unknown net
        [Init(c0, "a"), Init(CellAddress(0, 1), 0), ExecOr((c0,), CellAddress(0, 1)), Read(CellAddress(0, 1))],
        [Init(CellAddress(9, 0), "a"), Read(CellAddress(9, 0))],
    ]
    for ops in bad:
        with pytest.raises(ScheduleError):
            check_schedule(Schedule(["a"], ops, ops[-1].cell))
    with pytest.raises(ScheduleError, match="end by reading"):
        check_schedule(Schedule(["a"], [Init(c0, "a")], c0))


def test_schedule_json_round_trip(tmp_path):
    s = compile_expr("(a ^ b) ^ (c ^ d)")
    path = tmp_path / "s.json"
    s.to_json(path)
    back = Schedule.from_json(path)
    assert back.ops == s.ops and back.inputs == s.inputs and back.output_cell == s.output_cell
    assert json.loads(path.read_text())["ops"][0] == {"kind": "init", "cells": [list(s.ops[0].cell)], "target": s.ops[0].target}


# ---------------------------------------------------------------- simulation


@pytest.mark.parametrize("text", ["a|b", "!(a|b)", "a&b", "a^b", "!a", "a & !b | c"])
def test_simulated_schedules_match_evaluation(text):
    e = parse_expr(text)
    s = compile_expr(text)
    for env in assignments(variables(e)):
        assert simulate_schedule(s, env, energy=False).output == evaluate_expr(e, env)


def test_simulation_energy_views():
    run = simulate_schedule(compile_expr("a|b"), {"a": 1, "b": 0})
    assert run.output == 1
    fine, coarse = run.fine["full"], run.coarse["full"]
    assert coarse.init_nj == 312 + 1300 + 1300
    assert coarse.exec_nj == pytest.approx(fine.exec_nj)
    assert coarse.read_nj == pytest.approx(5.4)
    assert run.fine["optimal"].total_nj < fine.total_nj


def test_simulation_errors_carry_op_index():
    s = compile_expr("a|b")
    with pytest.raises(ScheduleError, match="no value") as ei:
        simulate_schedule(s, {"a": 1})
    assert ei.value.op_index == 1
    # a schedule that skips the output reset fails inside the gate contract
    c0, c1, c2 = CellAddress(0, 0), CellAddress(1, 0), CellAddress(2, 0)
    ops = [Init(c0, 1), Init(c1, 0), Init(c2, 1), ExecOr((c0, c1), c2), Read(c2)]
    with pytest.raises(ScheduleError) as ei:
        simulate_schedule(Schedule([], ops, c2), {})
    assert ei.value.op_index == 3
