"""Small arithmetic expression language for closed-form fields.

Grammar (precedence low to high)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Identifiers are the coordinates ``x``, ``y``, ``z``, the time ``t`` and the
constant ``pi``. Functions: sin, cos, exp, sqrt, min, max. Expressions are
parsed by this module, never handed to the host interpreter.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError

VARIABLES = ("x", "y", "z", "t")
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "min": 2, "max": 2}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class Node:
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    fn: str
    args: tuple


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[col - 1]!r} in expression {text!r}", 1, col)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start + 1))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            self.fail(f"expected {value!r}", tok)
        self.i += 1
        return tok

    def fail(self, msg, tok):
        shown = tok[1] if tok[0] != "end" else "end of expression"
        raise ParseError(f"{msg}, got {shown!r} in expression {self.text!r}", 1, tok[2])

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected token", self.peek())
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[0] == "op" and self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, val, col = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if kind == "id":
            self.take()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r} in expression {self.text!r}", 1, col)
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != FUNCTIONS[val]:
                    raise ParseError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", 1, col
                    )
                return Call(val, tuple(args))
            if val == "pi":
                return Num(math.pi)
            if val not in VARIABLES:
                raise ParseError(f"unknown identifier {val!r} in expression {self.text!r}", 1, col)
            return Var(val)
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        self.fail("expected a number, identifier or '('", self.peek())


def parse(text: str) -> Node:
    return _Parser(str(text)).parse()


# -- simplifying constructors -------------------------------------------------

ZERO = Num(0.0)
ONE = Num(1.0)


def _is(node, value):
    return isinstance(node, Num) and node.value == value


def add(a, b):
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def sub(a, b):
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Bin("-", a, b)


def mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def div(a, b):
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Bin("/", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def diff(node: Node, var: str) -> Node:
    """Symbolic partial derivative. min/max differentiate the active branch."""
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(diff(node.arg, var))
    if isinstance(node, Bin):
        a, b = node.left, node.right
        da, db = diff(a, var), diff(b, var)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        if node.op == "/":
            return div(sub(mul(da, b), mul(a, db)), mul(b, b))
        if node.op == "^":
            if _is(db, 0.0):
                if isinstance(b, Num):
                    return mul(mul(b, Bin("^", a, Num(b.value - 1.0))), da)
                return mul(mul(b, Bin("^", a, sub(b, ONE))), da)
            # general exponent: d(a^b) = a^b (b' ln a + b a'/a)
            return mul(node, add(mul(db, Call("log", (a,))), div(mul(b, da), a)))
    if isinstance(node, Call):
        fn = node.fn
        if fn in ("min", "max"):
            a, b = node.args
            return Call("_pick_" + fn, (a, b, diff(a, var), diff(b, var)))
        (a,) = node.args[:1]
        da = diff(a, var)
        if _is(da, 0.0):
            return ZERO
        if fn == "sin":
            return mul(Call("cos", (a,)), da)
        if fn == "cos":
            return neg(mul(Call("sin", (a,)), da))
        if fn == "exp":
            return mul(node, da)
        if fn == "sqrt":
            return div(da, mul(Num(2.0), node))
        if fn == "log":
            return div(da, a)
    raise TypeError(f"cannot differentiate {node!r}")


def _pick(op, a, b, da, db):
    choose_a = a <= b if op == "min" else a >= b
    return np.where(choose_a, da, db)


_NUMPY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "log": np.log,
    "min": np.minimum,
    "max": np.maximum,
}


def evaluate(node: Node, env: dict):
    """Evaluate on numpy arrays (or scalars) bound in ``env``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Bin):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    if isinstance(node, Call):
        if node.fn.startswith("_pick_"):
            vals = [evaluate(arg, env) for arg in node.args]
            return _pick(node.fn[6:], *vals)
        return _NUMPY[node.fn](*[evaluate(arg, env) for arg in node.args])
    raise TypeError(node)


def free_variables(node: Node) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.arg)
    if isinstance(node, Bin):
        return free_variables(node.left) | free_variables(node.right)
    out = set()
    for arg in node.args:
        out |= free_variables(arg)
    return out
