"""Arithmetic expressions over the coordinates x1..xm.

Grammar (lowest to highest precedence)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | VAR | FUNC "(" expr ("," expr)* ")" | "(" expr ")"

``^`` is right-associative and binds tighter than a leading minus, so
``-2^2`` is ``-4`` and ``2^-1`` is ``0.5``. Variables are ``x1`` .. ``xm``
plus the constant ``pi``. Functions: sin, cos, exp, log, sqrt, abs, min, max.

Evaluation is vectorized: a point of shape ``(m,)`` gives a float, a batch
of shape ``(n, m)`` gives an array of shape ``(n,)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "ExprDomainError",
    "Expression",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "parse",
    "evaluate",
    "to_text",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, column: int):
        super().__init__(f"{message} at column {column}")
        self.column = column


class ExprDomainError(ExprError, ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]


Node = Num | Var | Neg | BinOp | Call

_ARITY = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExprSyntaxError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dimension = dimension

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, col = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", col)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, col = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", col)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, col = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in _ARITY:
                    raise ExprSyntaxError(f"unknown function {text}", col)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != _ARITY[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {_ARITY[text]} argument(s), got {len(args)}", col
                    )
                return Call(text, tuple(args))
            if text == "pi":
                return Num(math.pi)
            m = re.fullmatch(r"x([1-9]\d*)", text)
            if m is None or int(m.group(1)) > self.dimension:
                raise ExprSyntaxError(f"unknown identifier {text}", col)
            return Var(int(m.group(1)) - 1)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", col)


@dataclass(frozen=True)
class Expression:
    """Parsed expression bound to a coordinate dimension."""

    root: Node
    dimension: int
    source: str = ""

    def __call__(self, x):
        return evaluate(self, x)

    def __str__(self) -> str:
        return to_text(self.root)


def parse(text: str, dimension: int) -> Expression:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 1)
    if dimension < 1:
        raise ValueError("dimension must be positive")
    return Expression(_Parser(text, dimension).parse(), dimension, text)


def to_text(node: Node) -> str:
    """Fully parenthesized text that parses back to an identical tree."""
    if isinstance(node, Num):
        # repr round-trips doubles exactly
        return f"({node.value!r})" if node.value < 0 else repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)}{node.op}{to_text(node.right)})"
    args = ",".join(to_text(a) for a in node.args)
    return f"{node.name}({args})"


def _domain_check(bad, message):
    if np.any(bad):
        raise ExprDomainError(message)


def _eval(node: Node, cols):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return cols[node.index]
    if isinstance(node, Neg):
        return -_eval(node.operand, cols)
    if isinstance(node, BinOp):
        a = _eval(node.left, cols)
        b = _eval(node.right, cols)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            _domain_check(np.asarray(b) == 0, "division by zero")
            return np.divide(a, b)
        a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        _domain_check(
            (a_arr < 0) & (b_arr != np.round(b_arr)),
            "negative base with non-integer exponent",
        )
        _domain_check((a_arr == 0) & (b_arr < 0), "zero to a negative power")
        with np.errstate(over="ignore"):
            return np.power(a_arr, b_arr)
    args = [_eval(a, cols) for a in node.args]
    name = node.name
    if name == "log":
        _domain_check(np.asarray(args[0]) <= 0, "log of non-positive value")
        return np.log(args[0])
    if name == "sqrt":
        _domain_check(np.asarray(args[0]) < 0, "sqrt of negative value")
        return np.sqrt(args[0])
    if name == "min":
        return np.minimum(args[0], args[1])
    if name == "max":
        return np.maximum(args[0], args[1])
    with np.errstate(over="ignore"):
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name](args[0])


def evaluate(e: Expression, x):
    """Evaluate at a point ``(m,)`` or a batch ``(n, m)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.shape[-1] != e.dimension:
        raise ValueError(f"expected points of dimension {e.dimension}, got {batch.shape[-1]}")
    cols = [batch[:, i] for i in range(e.dimension)]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.broadcast_to(np.asarray(_eval(e.root, cols), dtype=float), (batch.shape[0],))
    if single:
        return float(out[0])
    return np.array(out)
