"""Tree-walking evaluator. Assumes the program already passed the checker."""

from __future__ import annotations

from typing import Any, Callable, Mapping

from ..errors import EvalError
from ..graph.model import zero_value
from .syntax import (
    Assign,
    Binary,
    Call,
    Expr,
    Hole,
    IfExpr,
    Let,
    ListLit,
    Literal,
    OutRef,
    Program,
    Unary,
    Var,
    parse_expr,
    parse_program,
)

CallHook = Callable[[str, list[Any]], Any]


def _typeof(v: Any) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, float):
        return "float"
    if isinstance(v, str):
        return "str"
    if isinstance(v, list):
        return f"list[{_typeof(v[0])}]" if v else "list[?]"
    return type(v).__name__


def _to_int(v: Any) -> int:
    try:
        return int(v)
    except ValueError:
        raise EvalError(f"to_int: cannot convert {v!r}") from None


def _to_float(v: Any) -> float:
    try:
        return float(v)
    except ValueError:
        raise EvalError(f"to_float: cannot convert {v!r}") from None


def _to_str(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _get(xs: list, i: int) -> Any:
    if not 0 <= i < len(xs):
        raise EvalError(f"list index {i} out of range for length {len(xs)}")
    return xs[i]


def _head(xs: list) -> Any:
    if not xs:
        raise EvalError("head of empty list")
    return xs[0]


BUILTINS: dict[str, Callable[..., Any]] = {
    "concat": lambda *parts: "".join(parts),
    "upper": str.upper,
    "lower": str.lower,
    "split": lambda s, sep: s.split(sep) if sep else list(s),
    "join": lambda xs, sep: sep.join(xs),
    "len": len,
    "get": _get,
    "append": lambda xs, x: [*xs, x],
    "head": _head,
    "tail": lambda xs: list(xs[1:]),
    "typeof": _typeof,
    "to_str": _to_str,
    "to_int": _to_int,
    "to_float": _to_float,
}


class _Evaluator:
    def __init__(self, env: Mapping[str, Any], outs: Mapping[str, Any], tool: CallHook | None, virtual: CallHook | None):
        self.env = dict(env)
        self.outs = outs
        self.tool = tool
        self.virtual = virtual

    def eval(self, e: Expr) -> Any:
        if isinstance(e, Literal):
            return e.value
        if isinstance(e, Var):
            return self.env[e.name]
        if isinstance(e, OutRef):
            return self.outs[e.port]
        if isinstance(e, ListLit):
            return [self.eval(x) for x in e.items]
        if isinstance(e, Unary):
            v = self.eval(e.operand)
            return (not v) if e.op == "not" else -v
        if isinstance(e, Binary):
            return self._binary(e)
        if isinstance(e, IfExpr):
            return self.eval(e.then) if self.eval(e.cond) else self.eval(e.other)
        if isinstance(e, Call):
            args = [self.eval(a) for a in e.args]
            if e.target == "builtin":
                return BUILTINS[e.name](*args)
            hook = self.tool if e.target == "tool" else self.virtual
            if hook is None:
                raise EvalError(f"{e.target}.{e.name} is not available in this context")
            return hook(e.name, args)
        raise EvalError(f"cannot evaluate {type(e).__name__}")

    def _binary(self, e: Binary) -> Any:
        if e.op == "and":
            return bool(self.eval(e.left)) and bool(self.eval(e.right))
        if e.op == "or":
            return bool(self.eval(e.left)) or bool(self.eval(e.right))
        a, b = self.eval(e.left), self.eval(e.right)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op in ("/", "%"):
            if b == 0:
                raise EvalError(f"division by zero at {e.line}:{e.col}")
            if op == "%":
                return a % b
            return a // b if isinstance(a, int) else a / b
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b


def evaluate(
    program: Program | str,
    env: Mapping[str, Any],
    output_types: Mapping[str, str],
    *,
    tool: CallHook | None = None,
    virtual: CallHook | None = None,
) -> tuple[dict[str, Any], bool]:
    """Run a body; returns ``(outputs, simulated)``.

    ``simulated`` is true when any output came from a ``stub`` placeholder,
    in which case that output holds its type's zero value.
    """
    if isinstance(program, str):
        program = parse_program(program)
    ev = _Evaluator(env, {}, tool, virtual)
    outputs: dict[str, Any] = {}
    simulated = False
    for stmt in program.statements:
        if isinstance(stmt, Let):
            ev.env[stmt.name] = ev.eval(stmt.value)
        elif isinstance(stmt, Assign):
            if isinstance(stmt.value, Hole):
                outputs[stmt.port] = zero_value(output_types[stmt.port])
                simulated = True
            else:
                outputs[stmt.port] = ev.eval(stmt.value)
    return outputs, simulated


def eval_condition(source: str, env: Mapping[str, Any], outputs: Mapping[str, Any] | None = None) -> bool:
    return bool(_Evaluator(env, outputs or {}, None, None).eval(parse_expr(source)))
