"""Logic-in-memory compiler: Boolean expressions to MAGIC micro-op schedules."""
from .expr import And, Expr, Not, Or, UnboundVariableError, Var, Xor, depth, evaluate_expr, to_text, variables
from .lower import gate_counts, is_lowered, lower_to_or_not
from .mapper import Allocation, MappingError, Schedule, ScheduleError, allocate_and_emit, check_schedule
from .parser import ParseError, parse_expr
from .runner import ScheduleRun, simulate_schedule


def compile_expr(text: str, inputs=None, geometry=None, max_fanin: int = 2) -> Schedule:
    """Parse, lower and map ``text`` in one go."""
    e = lower_to_or_not(parse_expr(text))
    return allocate_and_emit(e, inputs if inputs is not None else variables(parse_expr(text)), geometry, max_fanin)


__all__ = [
    "And", "Expr", "Not", "Or", "Var", "Xor", "UnboundVariableError", "depth", "evaluate_expr", "to_text",
    "variables", "gate_counts", "is_lowered", "lower_to_or_not", "Allocation", "MappingError", "Schedule",
    "ScheduleError", "allocate_and_emit", "check_schedule", "ParseError", "parse_expr", "ScheduleRun",
    "simulate_schedule", "compile_expr",
]
