"""Tokenizer, AST and recursive-descent parser for node bodies and contracts.

Grammar (statements end with ``;``, ``#`` starts a line comment)::

    program   := stmt*
    stmt      := "let" IDENT "=" expr ";"  |  "out" "." IDENT "=" expr ";"
    expr      := "if" expr "then" expr "else" expr  |  or
    or        := and ("or" and)*
    and       := not ("and" not)*
    not       := "not" not  |  cmp
    cmp       := add (CMPOP add)?
    add       := mul (("+" | "-") mul)*
    mul       := unary (("*" | "/" | "%") unary)*
    unary     := "-" unary  |  primary
    primary   := INT | FLOAT | STRING | "true" | "false" | "stub"
               | "[" [expr ("," expr)*] "]"  |  "(" expr ")"
               | IDENT ["(" args ")"]  |  "out" "." IDENT
               | "tool" "." IDENT ("." IDENT)* "(" args ")"
               | "virtual" "." IDENT "(" args ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

from ..errors import ExprError

KEYWORDS = frozenset(
    {"let", "if", "then", "else", "and", "or", "not", "true", "false", "out", "tool", "virtual", "stub"}
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[-+*/%<>=(),;.\[\]])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # int float string ident kw op eof
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident" and text in KEYWORDS:
            tokens.append(Token("kw", text, line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unescape(raw: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), raw[1:-1])


def quote(text: str) -> str:
    """Render ``text`` as a string literal."""
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    line: int
    col: int


@dataclass(frozen=True)
class Literal(Expr):
    value: Any


@dataclass(frozen=True)
class ListLit(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class OutRef(Expr):
    port: str


@dataclass(frozen=True)
class Hole(Expr):
    """The ``stub`` placeholder: evaluates to the zero value of the assigned port."""


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IfExpr(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class Call(Expr):
    target: str  # "builtin" | "tool" | "virtual"
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Let:
    name: str
    value: Expr
    line: int
    col: int


@dataclass(frozen=True)
class Assign:
    port: str
    value: Expr
    line: int
    col: int


@dataclass(frozen=True)
class Program:
    statements: tuple[Let | Assign, ...]

    def walk(self):
        for stmt in self.statements:
            yield from walk(stmt.value)


def walk(expr: Expr):
    yield expr
    if isinstance(expr, ListLit):
        for item in expr.items:
            yield from walk(item)
    elif isinstance(expr, Unary):
        yield from walk(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk(expr.left)
        yield from walk(expr.right)
    elif isinstance(expr, IfExpr):
        yield from walk(expr.cond)
        yield from walk(expr.then)
        yield from walk(expr.other)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from walk(arg)


# -- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str) -> None:
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.tok
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text or kind
            got = self.tok.text or "end of input"
            raise ExprError(f"expected {want!r}, found {got!r}", self.tok.line, self.tok.col)
        return self.advance()

    def program(self) -> Program:
        stmts: list[Let | Assign] = []
        while not self.at("eof"):
            tok = self.tok
            if self.at("kw", "let"):
                self.advance()
                name = self.expect("ident").text
                self.expect("op", "=")
                stmts.append(Let(name, self.expr(), tok.line, tok.col))
            elif self.at("kw", "out"):
                self.advance()
                self.expect("op", ".")
                port = self.expect("ident").text
                self.expect("op", "=")
                stmts.append(Assign(port, self.expr(), tok.line, tok.col))
            else:
                raise ExprError(f"expected 'let' or 'out', found {tok.text!r}", tok.line, tok.col)
            self.expect("op", ";")
        return Program(tuple(stmts))

    def expr(self) -> Expr:
        if self.at("kw", "if"):
            tok = self.advance()
            cond = self.expr()
            self.expect("kw", "then")
            then = self.expr()
            self.expect("kw", "else")
            return IfExpr(tok.line, tok.col, cond, then, self.expr())
        return self.or_()

    def or_(self) -> Expr:
        left = self.and_()
        while self.at("kw", "or"):
            tok = self.advance()
            left = Binary(tok.line, tok.col, "or", left, self.and_())
        return left

    def and_(self) -> Expr:
        left = self.not_()
        while self.at("kw", "and"):
            tok = self.advance()
            left = Binary(tok.line, tok.col, "and", left, self.not_())
        return left

    def not_(self) -> Expr:
        if self.at("kw", "not"):
            tok = self.advance()
            return Unary(tok.line, tok.col, "not", self.not_())
        return self.cmp()

    def cmp(self) -> Expr:
        left = self.add()
        if self.tok.kind == "op" and self.tok.text in ("==", "!=", "<", "<=", ">", ">="):
            tok = self.advance()
            return Binary(tok.line, tok.col, tok.text, left, self.add())
        return left

    def add(self) -> Expr:
        left = self.mul()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            tok = self.advance()
            left = Binary(tok.line, tok.col, tok.text, left, self.mul())
        return left

    def mul(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/", "%"):
            tok = self.advance()
            left = Binary(tok.line, tok.col, tok.text, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.at("op", "-"):
            tok = self.advance()
            return Unary(tok.line, tok.col, "-", self.unary())
        return self.primary()

    def args(self) -> tuple[Expr, ...]:
        self.expect("op", "(")
        items: list[Expr] = []
        if not self.at("op", ")"):
            items.append(self.expr())
            while self.at("op", ","):
                self.advance()
                items.append(self.expr())
        self.expect("op", ")")
        return tuple(items)

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "int":
            self.advance()
            return Literal(tok.line, tok.col, int(tok.text))
        if tok.kind == "float":
            self.advance()
            return Literal(tok.line, tok.col, float(tok.text))
        if tok.kind == "string":
            self.advance()
            return Literal(tok.line, tok.col, _unescape(tok.text))
        if tok.kind == "kw" and tok.text in ("true", "false"):
            self.advance()
            return Literal(tok.line, tok.col, tok.text == "true")
        if tok.kind == "kw" and tok.text == "stub":
            self.advance()
            return Hole(tok.line, tok.col)
        if self.at("op", "("):
            self.advance()
            inner = self.expr()
            self.expect("op", ")")
            return inner
        if self.at("op", "["):
            self.advance()
            items: list[Expr] = []
            if not self.at("op", "]"):
                items.append(self.expr())
                while self.at("op", ","):
                    self.advance()
                    items.append(self.expr())
            self.expect("op", "]")
            return ListLit(tok.line, tok.col, tuple(items))
        if tok.kind == "kw" and tok.text == "out":
            self.advance()
            self.expect("op", ".")
            return OutRef(tok.line, tok.col, self.expect("ident").text)
        if tok.kind == "kw" and tok.text in ("tool", "virtual"):
            self.advance()
            self.expect("op", ".")
            parts = [self.expect("ident").text]
            while tok.text == "tool" and self.at("op", "."):
                self.advance()
                parts.append(self.expect("ident").text)
            return Call(tok.line, tok.col, tok.text, ".".join(parts), self.args())
        if tok.kind == "ident":
            self.advance()
            if self.at("op", "("):
                return Call(tok.line, tok.col, "builtin", tok.text, self.args())
            return Var(tok.line, tok.col, tok.text)
        raise ExprError(f"unexpected {tok.text or 'end of input'!r}", tok.line, tok.col)


@lru_cache(maxsize=4096)
def parse_program(source: str) -> Program:
    return _Parser(source).program()


@lru_cache(maxsize=4096)
def parse_expr(source: str) -> Expr:
    p = _Parser(source)
    expr = p.expr()
    if not p.at("eof"):
        raise ExprError(f"trailing input {p.tok.text!r}", p.tok.line, p.tok.col)
    return expr


def references(program: Program) -> dict[str, set[str]]:
    """Names of tools and virtual functions a program calls, plus whether it has holes."""
    refs: dict[str, set[str]] = {"tool": set(), "virtual": set(), "stub": set()}
    for expr in program.walk():
        if isinstance(expr, Call) and expr.target in ("tool", "virtual"):
            refs[expr.target].add(expr.name)
        elif isinstance(expr, Hole):
            refs["stub"].add("stub")
    return refs
