"""Static type checking over the primitive type system.

Types are the primitive type strings (``"int"``, ``"list[str]"``, ...) plus two
internal markers: ``EMPTY`` for the literal ``[]`` and ``HOLE`` for ``stub``.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from ..errors import ExprError
from ..graph.model import SCALAR_TYPES, element_type
from ..toolspec import TOOL_SIGNATURES
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

EMPTY = "list[?]"
HOLE = "?"
NUMERIC = ("int", "float")

Signature = tuple[Sequence[str], str]


def _is_list(t: str) -> bool:
    return t == EMPTY or element_type(t) is not None


def unify(a: str, b: str) -> str | None:
    if a == b:
        return a
    if a == EMPTY and _is_list(b):
        return b
    if b == EMPTY and _is_list(a):
        return a
    return None


def _fail(expr: Expr, message: str) -> ExprError:
    return ExprError(message, expr.line, expr.col)


class _Checker:
    def __init__(
        self,
        env: Mapping[str, str],
        outputs: Mapping[str, str],
        virtuals: Mapping[str, Signature],
        tools: Mapping[str, Signature],
        out_readable: bool,
    ) -> None:
        self.env = dict(env)
        self.outputs = outputs
        self.virtuals = virtuals
        self.tools = tools
        self.out_readable = out_readable

    def infer(self, e: Expr) -> str:
        if isinstance(e, Literal):
            return {bool: "bool", int: "int", float: "float", str: "str"}[type(e.value)]
        if isinstance(e, Var):
            if e.name not in self.env:
                raise _fail(e, f"unbound variable {e.name!r}")
            return self.env[e.name]
        if isinstance(e, OutRef):
            if not self.out_readable:
                raise _fail(e, f"out.{e.port} cannot be read here")
            if e.port not in self.outputs:
                raise _fail(e, f"unknown output port {e.port!r}")
            return self.outputs[e.port]
        if isinstance(e, Hole):
            raise _fail(e, "'stub' is only allowed as the whole right-hand side of an out assignment")
        if isinstance(e, ListLit):
            return self._list(e)
        if isinstance(e, Unary):
            t = self.infer(e.operand)
            if e.op == "not":
                if t != "bool":
                    raise _fail(e, f"'not' needs bool, got {t}")
                return "bool"
            if t not in NUMERIC:
                raise _fail(e, f"unary '-' needs int or float, got {t}")
            return t
        if isinstance(e, Binary):
            return self._binary(e)
        if isinstance(e, IfExpr):
            c = self.infer(e.cond)
            if c != "bool":
                raise _fail(e, f"if-condition must be bool, got {c}")
            a, b = self.infer(e.then), self.infer(e.other)
            t = unify(a, b)
            if t is None:
                raise _fail(e, f"if-branches disagree: {a} vs {b}")
            return t
        if isinstance(e, Call):
            return self._call(e)
        raise _fail(e, f"unsupported expression {type(e).__name__}")

    def _list(self, e: ListLit) -> str:
        if not e.items:
            return EMPTY
        types = [self.infer(item) for item in e.items]
        first = types[0]
        if first not in SCALAR_TYPES:
            raise _fail(e, "list elements must be scalars (one list level only)")
        for t in types[1:]:
            if t != first:
                raise _fail(e, f"list elements disagree: {first} vs {t}")
        return f"list[{first}]"

    def _binary(self, e: Binary) -> str:
        a, b = self.infer(e.left), self.infer(e.right)
        op = e.op
        if op in ("and", "or"):
            if a != "bool" or b != "bool":
                raise _fail(e, f"'{op}' needs bool operands, got {a} and {b}")
            return "bool"
        if op in ("==", "!="):
            if unify(a, b) is None:
                raise _fail(e, f"cannot compare {a} with {b}")
            return "bool"
        if op in ("<", "<=", ">", ">="):
            if a != b or a not in ("int", "float", "str"):
                raise _fail(e, f"'{op}' needs two ints, floats or strs, got {a} and {b}")
            return "bool"
        if a != b or a not in NUMERIC:
            raise _fail(e, f"'{op}' needs two ints or two floats, got {a} and {b}")
        return a

    def _call(self, e: Call) -> str:
        args = [self.infer(a) for a in e.args]
        if e.target == "tool":
            if e.name not in self.tools:
                raise _fail(e, f"unknown tool {e.name!r}")
            return self._apply(e, f"tool.{e.name}", self.tools[e.name], args)
        if e.target == "virtual":
            if e.name not in self.virtuals:
                raise _fail(e, f"undeclared virtual function {e.name!r}")
            return self._apply(e, f"virtual.{e.name}", self.virtuals[e.name], args)
        return self._builtin(e, args)

    def _apply(self, e: Call, label: str, sig: Signature, args: list[str]) -> str:
        params, result = sig
        if len(params) != len(args):
            raise _fail(e, f"{label} takes {len(params)} arguments, got {len(args)}")
        for i, (p, a) in enumerate(zip(params, args)):
            if unify(p, a) != p:
                raise _fail(e, f"{label} argument {i + 1} must be {p}, got {a}")
        return result

    def _builtin(self, e: Call, args: list[str]) -> str:
        name, n = e.name, len(args)

        def need(count: int) -> None:
            if n != count:
                raise _fail(e, f"{name} takes {count} arguments, got {n}")

        def arg_is(i: int, *types: str) -> None:
            if args[i] not in types:
                raise _fail(e, f"{name} argument {i + 1} must be {' or '.join(types)}, got {args[i]}")

        if name == "concat":
            if n < 1:
                raise _fail(e, "concat takes at least 1 argument")
            for i in range(n):
                arg_is(i, "str")
            return "str"
        if name in ("upper", "lower"):
            need(1)
            arg_is(0, "str")
            return "str"
        if name == "split":
            need(2)
            arg_is(0, "str")
            arg_is(1, "str")
            return "list[str]"
        if name == "join":
            need(2)
            if unify("list[str]", args[0]) != "list[str]":
                raise _fail(e, f"join argument 1 must be list[str], got {args[0]}")
            arg_is(1, "str")
            return "str"
        if name == "len":
            need(1)
            if args[0] != "str" and not _is_list(args[0]):
                raise _fail(e, f"len needs str or list, got {args[0]}")
            return "int"
        if name in ("get", "head", "tail"):
            need(2 if name == "get" else 1)
            if args[0] == EMPTY:
                raise _fail(e, f"{name} on an empty list literal has no element type")
            elem = element_type(args[0])
            if elem is None:
                raise _fail(e, f"{name} needs a list, got {args[0]}")
            if name == "get":
                arg_is(1, "int")
            return args[0] if name == "tail" else elem
        if name == "append":
            need(2)
            if not _is_list(args[0]):
                raise _fail(e, f"append needs a list, got {args[0]}")
            if args[1] not in SCALAR_TYPES:
                raise _fail(e, f"append element must be a scalar, got {args[1]}")
            if args[0] != EMPTY and element_type(args[0]) != args[1]:
                raise _fail(e, f"cannot append {args[1]} to {args[0]}")
            return f"list[{args[1]}]"
        if name == "typeof":
            need(1)
            return "str"
        if name == "to_str":
            need(1)
            arg_is(0, *SCALAR_TYPES)
            return "str"
        if name == "to_int":
            need(1)
            arg_is(0, "int", "float", "str", "bool")
            return "int"
        if name == "to_float":
            need(1)
            arg_is(0, "int", "float", "str")
            return "float"
        raise _fail(e, f"unknown function {name!r}")


def check_program(
    program: Program | str,
    inputs: Mapping[str, str],
    outputs: Mapping[str, str],
    virtuals: Mapping[str, Signature] | None = None,
    tools: Mapping[str, Signature] = TOOL_SIGNATURES,
    allow_stub: bool = False,
) -> None:
    """Raise :class:`ExprError` unless ``program`` is a well-typed body.

    Every output port must be assigned exactly once; ``let`` names may not
    shadow inputs or earlier lets.
    """
    if isinstance(program, str):
        program = parse_program(program)
    checker = _Checker(inputs, outputs, virtuals or {}, tools, out_readable=False)
    assigned: set[str] = set()
    for stmt in program.statements:
        if isinstance(stmt, Let):
            if stmt.name in checker.env:
                raise ExprError(f"{stmt.name!r} is already bound", stmt.line, stmt.col)
            checker.env[stmt.name] = checker.infer(stmt.value)
            continue
        assert isinstance(stmt, Assign)
        if stmt.port not in outputs:
            raise ExprError(f"unknown output port {stmt.port!r}", stmt.line, stmt.col)
        if stmt.port in assigned:
            raise ExprError(f"out.{stmt.port} assigned twice", stmt.line, stmt.col)
        assigned.add(stmt.port)
        want = outputs[stmt.port]
        if isinstance(stmt.value, Hole):
            if not allow_stub:
                raise ExprError("'stub' placeholder not allowed at this floor", stmt.line, stmt.col)
            continue
        got = checker.infer(stmt.value)
        if unify(want, got) != want:
            raise ExprError(f"out.{stmt.port} is {want}, assigned {got}", stmt.value.line, stmt.value.col)
    missing = [p for p in outputs if p not in assigned]
    if missing:
        raise ExprError("output ports never assigned: " + ", ".join(missing))


def infer_expr(
    expr: Expr | str,
    env: Mapping[str, str],
    outputs: Mapping[str, str] | None = None,
) -> str:
    if isinstance(expr, str):
        expr = parse_expr(expr)
    checker = _Checker(env, outputs or {}, {}, {}, out_readable=outputs is not None)
    return checker.infer(expr)


def check_condition(source: str, env: Mapping[str, str], outputs: Mapping[str, str] | None = None) -> None:
    """Raise unless ``source`` is an effect-free expression of type bool."""
    t = infer_expr(source, env, outputs)
    if t != "bool":
        raise ExprError(f"condition must be bool, got {t}")
