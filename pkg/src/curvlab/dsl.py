"""Scalar-field expression language with exact second-order jets.

Grammar (see ``docs/dsl.md``)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus (``-x1^2 == -(x1^2)``) and is
right-associative; the exponent may itself carry a sign (``2^-x1``).

Variables are ``x1 .. xn`` unless custom names are supplied. Any other bare
name is a parameter, resolved when the expression is evaluated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Collection, Mapping, Sequence

import numpy as np

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos")
CONSTANTS = {"pi": math.pi}


class DSLError(Exception):
    """Base class for expression-language errors."""


class ParseError(DSLError):
    """Malformed input; ``offset`` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.message = message
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class EvalError(DSLError):
    """Domain error raised while evaluating a jet."""

    def __init__(self, message: str, node: "Node"):
        self.node = node
        super().__init__(f"{message} in '{to_text(node)}'")


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based
    name: str = ""


@dataclass(frozen=True)
class Param:
    name: str


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
    func: str
    arg: "Node"


Node = Num | Var | Param | Neg | BinOp | Call


def to_text(node: Node) -> str:
    """Fully parenthesized rendering; ``parse(to_text(e))`` rebuilds ``e``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name or f"x{node.index + 1}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Node) -> set[int]:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return variables(node.arg)
    return set()


def parameters(node: Node) -> set[str]:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Neg):
        return parameters(node.operand)
    if isinstance(node, BinOp):
        return parameters(node.left) | parameters(node.right)
    if isinstance(node, Call):
        return parameters(node.arg)
    return set()


def substitute(node: Node, mapping: Mapping[int, Node]) -> Node:
    """Replace variables by sub-expressions (used to compose fields)."""
    if isinstance(node, Var):
        return mapping.get(node.index, node)
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping))
    return node


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode()), text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), len(text[:pos].encode())))
        pos = m.end()
    tokens.append(("end", "", len(text.encode())))
    return tokens


class _Parser:
    def __init__(self, text, n, params, var_names):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.params = None if params is None else set(params)
        self.var_names = {name: k for k, name in enumerate(var_names)} if var_names else None

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, tok[2], self.text)

    def expect(self, value, what):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            raise self.error(f"expected {what}")
        return self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error("expected operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, value, offset = tok
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")", "')'")
            return node
        if kind == "name":
            self.take()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function '{value}'", offset, self.text)
                self.take()
                arg = self.expr()
                self.expect(")", "')'")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise ParseError(f"function '{value}' used without argument", offset, self.text)
            return self.name(value, offset)
        raise self.error("expected expression")

    def name(self, value, offset):
        if self.var_names is not None:
            if value in self.var_names:
                return Var(self.var_names[value], value)
        else:
            m = re.fullmatch(r"x([1-9][0-9]*)", value)
            if m:
                index = int(m.group(1))
                if index > self.n:
                    raise ParseError(
                        f"variable index out of range: {value} with dimension {self.n}",
                        offset,
                        self.text,
                    )
                return Var(index - 1)
        if value in CONSTANTS:
            return Num(CONSTANTS[value])
        if self.params is not None and value not in self.params:
            raise ParseError(f"unknown identifier '{value}'", offset, self.text)
        return Param(value)


def parse(
    text: str,
    n: int,
    params: Collection[str] | None = None,
    var_names: Sequence[str] | None = None,
) -> Node:
    """Parse ``text`` into an expression over ``n`` variables.

    If ``params`` is given, names outside it are rejected; otherwise every
    non-variable name is taken as a parameter. ``var_names`` replaces the
    default ``x1..xn`` spelling (e.g. ``("s",)`` for radial profiles).
    """
    if not text or not text.strip():
        raise ParseError("expected expression", 0, text)
    if var_names is not None and len(var_names) != n:
        raise ValueError("var_names must have length n")
    return _Parser(text, n, params, var_names).parse()


# -------------------------------------------------------------------- jets


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and Hessian of a scalar field.

    For a single point the shapes are ``()``, ``(n,)``, ``(n, n)``; for a
    batch of ``P`` points they gain a leading ``P`` axis.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


class _J:
    # Batched truncated Taylor arithmetic; grad/hess are None below the
    # requested order.
    __slots__ = ("v", "g", "h")

    def __init__(self, v, g=None, h=None):
        self.v = v
        self.g = g
        self.h = h


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _chain(a: _J, f0, f1, f2) -> _J:
    g = None if a.g is None else f1[..., None] * a.g
    h = None
    if a.h is not None:
        h = f1[..., None, None] * a.h + f2[..., None, None] * _outer(a.g, a.g)
    return _J(f0, g, h)


def _add(a: _J, b: _J, sign: float) -> _J:
    v = a.v + b.v if sign > 0 else a.v - b.v
    g = h = None
    if a.g is not None:
        g = a.g + b.g if sign > 0 else a.g - b.g
    if a.h is not None:
        h = a.h + b.h if sign > 0 else a.h - b.h
    return _J(v, g, h)


def _mul(a: _J, b: _J) -> _J:
    v = a.v * b.v
    g = h = None
    if a.g is not None:
        g = a.v[..., None] * b.g + b.v[..., None] * a.g
    if a.h is not None:
        cross = _outer(a.g, b.g)
        h = (
            a.v[..., None, None] * b.h
            + b.v[..., None, None] * a.h
            + (cross + np.swapaxes(cross, -1, -2))
        )
    return _J(v, g, h)


class _Evaluator:
    def __init__(self, x, params, order):
        self.x = x
        self.P = x.shape[0]
        self.n = x.shape[1]
        self.params = params
        self.order = order

    def const(self, c):
        v = np.full(self.P, float(c))
        g = np.zeros((self.P, self.n)) if self.order >= 1 else None
        h = np.zeros((self.P, self.n, self.n)) if self.order >= 2 else None
        return _J(v, g, h)

    def ev(self, node) -> _J:
        if isinstance(node, Num):
            return self.const(node.value)
        if isinstance(node, Param):
            if node.name not in self.params:
                raise EvalError(f"unbound parameter '{node.name}'", node)
            return self.const(self.params[node.name])
        if isinstance(node, Var):
            if node.index >= self.n:
                raise EvalError(f"variable index {node.index + 1} exceeds dimension {self.n}", node)
            j = self.const(0.0)
            j.v = self.x[:, node.index].astype(float, copy=True)
            if j.g is not None:
                j.g[:, node.index] = 1.0
            return j
        if isinstance(node, Neg):
            a = self.ev(node.operand)
            return _J(-a.v, None if a.g is None else -a.g, None if a.h is None else -a.h)
        if isinstance(node, BinOp):
            return self.binop(node)
        if isinstance(node, Call):
            return self.call(node)
        raise TypeError(f"not an expression node: {node!r}")

    def binop(self, node):
        op = node.op
        if op == "^":
            return self.power(node)
        a = self.ev(node.left)
        b = self.ev(node.right)
        if op == "+":
            return _add(a, b, 1.0)
        if op == "-":
            return _add(a, b, -1.0)
        if op == "*":
            return _mul(a, b)
        if op == "/":
            if np.any(b.v == 0.0):
                raise EvalError("division by zero", node)
            inv = 1.0 / b.v
            return _mul(a, _chain(b, inv, -inv * inv, 2.0 * inv * inv * inv))
        raise ValueError(f"unknown operator {op!r}")

    def power(self, node):
        a = self.ev(node.left)
        if not variables(node.right):
            c = self.ev(node.right).v
            return self._const_power(node, a, float(c[0]) if c.size else 1.0)
        # general case a^b = exp(b log a)
        if np.any(a.v <= 0.0):
            raise EvalError("power with variable exponent needs a positive base", node)
        b = self.ev(node.right)
        la = _chain(a, np.log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v))
        e = _mul(b, la)
        ex = np.exp(e.v)
        return _chain(e, ex, ex, ex)

    def _const_power(self, node, a, c):
        if c == 0.0:
            return self.const(1.0)
        if c == 1.0:
            return a
        is_int = float(c).is_integer()
        if not is_int and np.any(a.v < 0.0):
            raise EvalError("negative base with non-integer exponent", node)
        if np.any(a.v == 0.0) and (c < 0.0 or (not is_int and c < self.order)):
            raise EvalError("power is not differentiable at zero base", node)
        if c == 2.0:
            v = a.v
            return _chain(a, v * v, 2.0 * v, np.full_like(v, 2.0))
        f0 = a.v**c
        f1 = c * a.v ** (c - 1.0)
        f2 = c * (c - 1.0) * a.v ** (c - 2.0)
        return _chain(a, f0, f1, f2)

    def call(self, node):
        a = self.ev(node.arg)
        v = a.v
        f = node.func
        if f == "exp":
            e = np.exp(v)
            return _chain(a, e, e, e)
        if f == "log":
            if np.any(v <= 0.0):
                raise EvalError("log of non-positive value", node)
            return _chain(a, np.log(v), 1.0 / v, -1.0 / (v * v))
        if f == "sqrt":
            if np.any(v <= 0.0):
                raise EvalError("sqrt of non-positive value", node)
            r = np.sqrt(v)
            return _chain(a, r, 0.5 / r, -0.25 / (r * v))
        if f == "sin":
            s, c = np.sin(v), np.cos(v)
            return _chain(a, s, c, -s)
        if f == "cos":
            s, c = np.sin(v), np.cos(v)
            return _chain(a, c, -s, -c)
        raise EvalError(f"unknown function '{f}'", node)


def evaluate(node: Node, x, params: Mapping[str, float] | None = None, order: int = 2):
    """Evaluate ``node`` at points ``x`` (shape ``(n,)`` or ``(P, n)``).

    Returns ``(value, gradient, hessian)`` with entries ``None`` above
    ``order``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2:
        raise ValueError("points must have shape (n,) or (P, n)")
    if not np.all(np.isfinite(xb)):
        raise ValueError("evaluation point is not finite")
    j = _Evaluator(xb, dict(params or {}), order).ev(node)
    v, g, h = j.v, j.g, j.h
    if h is not None:
        # copy the upper triangle down so symmetry is exact
        iu = np.triu_indices(xb.shape[1], 1)
        h = h.copy()
        h[:, iu[1], iu[0]] = h[:, iu[0], iu[1]]
    if single:
        v = v[0]
        g = None if g is None else g[0]
        h = None if h is None else h[0]
    return v, g, h


def eval_jet2(node: Node, x, params: Mapping[str, float] | None = None) -> Jet2:
    """Exact value, gradient and Hessian of ``node`` at ``x``."""
    v, g, h = evaluate(node, x, params, order=2)
    return Jet2(v, g, h)


def eval_value(node: Node, x, params: Mapping[str, float] | None = None):
    return evaluate(node, x, params, order=0)[0]
