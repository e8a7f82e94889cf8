"""Payoff / dynamics expression language.

Expressions are ordinary infix formulas over the symbols ``t``, ``x[j]`` and
``u0[j] .. un[j]``.  A bare symbol such as ``u1`` means component 0.  The
supported operators are ``+ - * / ** ^`` (``^`` is power) and the functions
``min max exp sin cos abs``.

Parsing goes through :mod:`ast` and only a whitelisted subset of nodes is
accepted; the result is a small immutable tree that evaluates with numpy
broadcasting, so one call can tabulate a payoff over an entire action grid.
"""

from __future__ import annotations

import ast
import functools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

FUNCTIONS = {
    "exp": (1, np.exp),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "abs": (1, np.abs),
    "min": (None, None),
    "max": (None, None),
}

_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.Pow: "**"}


class ExpressionError(ValueError):
    """Raised for malformed expressions or references to undeclared symbols."""

    def __init__(self, message, source=None, column=None):
        self.source = source
        self.column = column
        if column is not None:
            message = f"{message} (column {column})"
        if source is not None:
            message = f"{message} in {source!r}"
        super().__init__(message)


class Node:
    __slots__ = ()

    def evaluate(self, env):
        raise NotImplementedError

    def symbols(self):
        """Set of ``(name, index)`` pairs referenced by the expression."""
        raise NotImplementedError

    def to_source(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Node):
    value: float

    def evaluate(self, env):
        return np.float64(self.value)

    def symbols(self):
        return frozenset()

    def to_source(self):
        if self.value < 0:
            return f"({self.value!r})"
        return repr(self.value)


@dataclass(frozen=True)
class Sym(Node):
    name: str
    index: int = 0

    def evaluate(self, env):
        return env[self.name][self.index]

    def symbols(self):
        return frozenset({(self.name, self.index)})

    def to_source(self):
        return f"{self.name}[{self.index}]"


@dataclass(frozen=True)
class Neg(Node):
    operand: Node

    def evaluate(self, env):
        return np.negative(self.operand.evaluate(env))

    def symbols(self):
        return self.operand.symbols()

    def to_source(self):
        return f"(-{self.operand.to_source()})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env):
        a = self.left.evaluate(env)
        b = self.right.evaluate(env)
        if self.op == "+":
            return np.add(a, b)
        if self.op == "-":
            return np.subtract(a, b)
        if self.op == "*":
            return np.multiply(a, b)
        if self.op == "/":
            return np.divide(a, b)
        return np.power(a, b)

    def symbols(self):
        return self.left.symbols() | self.right.symbols()

    def to_source(self):
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: tuple

    def evaluate(self, env):
        values = [a.evaluate(env) for a in self.args]
        if self.func == "min":
            return functools.reduce(np.minimum, values)
        if self.func == "max":
            return functools.reduce(np.maximum, values)
        return FUNCTIONS[self.func][1](values[0])

    def symbols(self):
        out = frozenset()
        for a in self.args:
            out = out | a.symbols()
        return out

    def to_source(self):
        return f"{self.func}({', '.join(a.to_source() for a in self.args)})"


class PayoffExpr:
    """A parsed expression together with its source text."""

    __slots__ = ("tree", "source")

    def __init__(self, tree: Node, source: str | None = None):
        self.tree = tree
        self.source = source if source is not None else tree.to_source()

    def __eq__(self, other):
        return isinstance(other, PayoffExpr) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    def __repr__(self):
        return f"PayoffExpr({self.source!r})"

    def symbols(self):
        return self.tree.symbols()

    def symbol_names(self):
        return {name for name, _ in self.tree.symbols()}

    def to_source(self):
        return self.tree.to_source()

    def is_constant(self):
        return not self.tree.symbols()

    def evaluate(self, env: Mapping[str, Sequence]):
        """Evaluate with ``env[name][index]`` bound to broadcastable arrays."""
        with np.errstate(all="ignore"):
            return self.tree.evaluate(env)


def parse_expression(text, dims: Mapping[str, int] | None = None) -> PayoffExpr:
    """Parse ``text``; if ``dims`` is given, check symbols against it.

    ``dims`` maps symbol names (``"t"``, ``"x"``, ``"u0"``, ...) to the number
    of components each one has.
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ExpressionError(f"expected an expression string, got {type(text).__name__}")
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"syntax error: {exc.msg}", text, exc.offset) from None
    node = _convert(tree.body, text)
    expr = PayoffExpr(node, text)
    if dims is not None:
        check_symbols(expr, dims)
    return expr


def check_symbols(expr: PayoffExpr, dims: Mapping[str, int]):
    for name, index in sorted(expr.symbols()):
        if name not in dims:
            raise ExpressionError(f"unknown symbol {name!r}", expr.source)
        if index >= dims[name]:
            raise ExpressionError(
                f"dimension mismatch: {name}[{index}] but {name} has {dims[name]} component(s)",
                expr.source,
            )


def _convert(node, text):
    col = getattr(node, "col_offset", None)
    col = None if col is None else col + 1
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError("only real literals are allowed", text, col)
        value = float(node.value)
        if not math.isfinite(value):
            raise ExpressionError("non-finite literal", text, col)
        return Num(value)
    if isinstance(node, ast.Name):
        return Sym(node.id, 0)
    if isinstance(node, ast.Subscript):
        if not isinstance(node.value, ast.Name):
            raise ExpressionError("only symbols can be indexed", text, col)
        idx = node.slice
        if not (isinstance(idx, ast.Constant) and type(idx.value) is int and idx.value >= 0):
            raise ExpressionError("symbol index must be a non-negative integer literal", text, col)
        return Sym(node.value.id, idx.value)
    if isinstance(node, ast.UnaryOp):
        operand = _convert(node.operand, text)
        if isinstance(node.op, ast.UAdd):
            return operand
        if isinstance(node.op, ast.USub):
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        raise ExpressionError("unsupported unary operator", text, col)
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionError("unsupported operator", text, col)
        return BinOp(op, _convert(node.left, text), _convert(node.right, text))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            name = getattr(node.func, "id", "?")
            raise ExpressionError(f"unknown function {name!r}", text, col)
        if node.keywords:
            raise ExpressionError("keyword arguments are not supported", text, col)
        arity = FUNCTIONS[node.func.id][0]
        args = tuple(_convert(a, text) for a in node.args)
        if (arity is not None and len(args) != arity) or not args:
            raise ExpressionError(f"wrong number of arguments to {node.func.id}", text, col)
        return Call(node.func.id, args)
    raise ExpressionError(f"unsupported syntax ({type(node).__name__})", text, col)
