"""Arithmetic expressions over chart coordinates, with second-order jets.

The grammar is intentionally small::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

``VARIABLE`` is ``x1`` .. ``xd``. ``^`` binds tighter than unary minus, so
``-x1^2`` is ``-(x1^2)``; it is right-associative (``2^3^2 == 2^(3^2)``).

Evaluation returns a :class:`Jet2` carrying value, gradient and Hessian,
propagated in a single forward pass.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "ExprDomainError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "Jet2",
    "parse_expr",
    "to_source",
    "eval_jet2",
    "eval_value",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class ExprDomainError(ExprError):
    """Raised when an expression leaves its domain at the evaluation point."""


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written in the source


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    pos = 0
    tokens = []
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int):
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, tok[2], self.source)

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] not in ("op",):
            raise self.error(f"expected {text!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            var = re.fullmatch(r"x([1-9]\d*)", text)
            if var:
                index = int(var.group(1))
                if index > self.dim:
                    raise ExprSyntaxError(
                        f"variable {text} out of range for dimension {self.dim}",
                        offset,
                        self.source,
                    )
                return Var(index)
            if text not in FUNCTIONS:
                raise ExprSyntaxError(f"unknown function {text!r}", offset, self.source)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(text, arg)
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(f"unexpected {text or 'end of input'!r}")


def parse_expr(source: str, dim: int) -> Expr:
    """Parse ``source`` into an expression over ``x1..x{dim}``."""
    if dim < 1:
        raise ValueError("dim must be positive")
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source)
    return _Parser(source, dim).parse()


def to_source(e: Expr) -> str:
    """Print ``e`` so that ``parse_expr(to_source(e))`` rebuilds the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# --------------------------------------------------------------------------
# Second-order forward mode
# --------------------------------------------------------------------------


class Jet2:
    """Value, gradient and Hessian of a scalar function at a point.

    Only the upper triangle of the Hessian is kept (row-major packed); the
    ``hess`` property mirrors it, so the returned matrix is symmetric bit for
    bit.
    """

    __slots__ = ("value", "grad", "_tri")

    def __init__(self, value: float, grad: np.ndarray, tri: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self._tri = tri

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    @property
    def hess(self) -> np.ndarray:
        d = self.dim
        iu = np.triu_indices(d)
        h = np.empty((d, d))
        h[iu] = self._tri
        h[(iu[1], iu[0])] = self._tri
        return h

    @classmethod
    def constant(cls, value: float, dim: int) -> "Jet2":
        return cls(value, np.zeros(dim), np.zeros(dim * (dim + 1) // 2))

    @classmethod
    def variable(cls, value: float, index: int, dim: int) -> "Jet2":
        grad = np.zeros(dim)
        grad[index] = 1.0
        return cls(value, grad, np.zeros(dim * (dim + 1) // 2))

    def _outer_tri(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        # packed upper triangle of a b^T + b a^T
        iu = np.triu_indices(self.dim)
        return a[iu[0]] * b[iu[1]] + b[iu[0]] * a[iu[1]]

    def chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Compose with a scalar function having derivatives ``f0, f1, f2`` here."""
        tri = f1 * self._tri + 0.5 * f2 * self._outer_tri(self.grad, self.grad)
        return Jet2(f0, f1 * self.grad, tri)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self._tri + other._tri)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self._tri - other._tri)

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self._tri)

    def __mul__(self, other: "Jet2") -> "Jet2":
        a, b = self, other
        tri = a.value * b._tri + b.value * a._tri + self._outer_tri(a.grad, b.grad)
        return Jet2(a.value * b.value, a.value * b.grad + b.value * a.grad, tri)

    def __truediv__(self, other: "Jet2") -> "Jet2":
        if other.value == 0.0:
            raise ExprDomainError("division by zero")
        v = other.value
        return self * other.chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r})"


def _constant_value(e: Expr) -> float | None:
    if variables(e):
        return None
    return eval_value(e, np.zeros(0))


def _unary(name: str, u: Jet2) -> Jet2:
    v = u.value
    if name == "sin":
        s, c = math.sin(v), math.cos(v)
        return u.chain(s, c, -s)
    if name == "cos":
        s, c = math.sin(v), math.cos(v)
        return u.chain(c, -s, -c)
    if name == "exp":
        ev = math.exp(v)
        return u.chain(ev, ev, ev)
    if name == "log":
        if v <= 0.0:
            raise ExprDomainError(f"log of non-positive value {v!r}")
        return u.chain(math.log(v), 1.0 / v, -1.0 / v**2)
    if name == "sqrt":
        if v <= 0.0:
            # not differentiable at 0
            raise ExprDomainError(f"sqrt of non-positive value {v!r}")
        r = math.sqrt(v)
        return u.chain(r, 0.5 / r, -0.25 / (r * v))
    if name == "tanh":
        t = math.tanh(v)
        s2 = 1.0 - t * t
        return u.chain(t, s2, -2.0 * t * s2)
    raise ExprError(f"unknown function {name!r}")


def _power(base: Jet2, exponent_expr: Expr, exponent: Jet2) -> Jet2:
    k = _constant_value(exponent_expr)
    b = base.value
    if k is not None and float(k).is_integer():
        n = int(k)
        if n == 0:
            return Jet2.constant(1.0, base.dim)
        if n < 0 and b == 0.0:
            raise ExprDomainError("zero base with negative exponent")
        f1 = n * b ** (n - 1) if n != 1 else 1.0
        f2 = n * (n - 1) * b ** (n - 2) if n not in (0, 1) else 0.0
        return base.chain(b**n, f1, f2)
    if b <= 0.0:
        raise ExprDomainError(f"non-integer power of non-positive base {b!r}")
    if k is not None:
        return base.chain(b**k, k * b ** (k - 1), k * (k - 1) * b ** (k - 2))
    return _unary("exp", exponent * _unary("log", base))


def _jet(e: Expr, point: np.ndarray) -> Jet2:
    d = point.shape[0]
    if isinstance(e, Num):
        return Jet2.constant(e.value, d)
    if isinstance(e, Var):
        if e.index > d:
            raise ExprError(f"variable x{e.index} outside point of length {d}")
        return Jet2.variable(point[e.index - 1], e.index - 1, d)
    if isinstance(e, Neg):
        return -_jet(e.operand, point)
    if isinstance(e, Call):
        return _unary(e.func, _jet(e.arg, point))
    left = _jet(e.left, point)
    right = _jet(e.right, point)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if e.op == "/":
        return left / right
    if e.op == "^":
        return _power(left, e.right, right)
    raise ExprError(f"unknown operator {e.op!r}")


def eval_jet2(e: Expr, point) -> Jet2:
    """Evaluate ``e`` with exact gradient and Hessian at ``point``."""
    point = np.asarray(point, dtype=float)
    with np.errstate(over="raise", invalid="raise"):
        try:
            jet = _jet(e, point)
        except (OverflowError, FloatingPointError) as exc:
            raise ExprDomainError(f"non-finite intermediate at {point.tolist()}: {exc}") from exc
    if not (math.isfinite(jet.value) and np.all(np.isfinite(jet.grad)) and np.all(np.isfinite(jet._tri))):
        raise ExprDomainError(f"non-finite result at {point.tolist()}")
    return jet


def eval_value(e: Expr, point) -> float:
    """Plain float evaluation, no derivatives."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(point[e.index - 1])
    if isinstance(e, Neg):
        return -eval_value(e.operand, point)
    if isinstance(e, Call):
        v = eval_value(e.arg, point)
        if e.func in ("log", "sqrt") and v <= 0.0:
            raise ExprDomainError(f"{e.func} of non-positive value {v!r}")
        return float(getattr(math, e.func)(v))
    a, b = eval_value(e.left, point), eval_value(e.right, point)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        if b == 0.0:
            raise ExprDomainError("division by zero")
        return a / b
    if float(b).is_integer() and not variables(e.right):
        return a ** int(b)
    if a <= 0.0:
        raise ExprDomainError(f"non-integer power of non-positive base {a!r}")
    return a**b
