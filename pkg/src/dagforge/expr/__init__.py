"""A small statically-typed expression language for node bodies and contracts."""

from .check import EMPTY, check_condition, check_program, infer_expr, unify
from .interp import eval_condition, evaluate
from .syntax import Program, parse_expr, parse_program, quote, references

__all__ = [
    "EMPTY",
    "Program",
    "check_condition",
    "check_program",
    "eval_condition",
    "evaluate",
    "infer_expr",
    "parse_expr",
    "parse_program",
    "quote",
    "references",
    "unify",
]
