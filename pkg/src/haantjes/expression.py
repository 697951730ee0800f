"""Parsing and evaluation of the model-definition expression language.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := unary ("^" factor)?
    unary  := "-" unary | atom
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

``^`` is right-associative and binds looser than unary minus, so ``-q1^2``
means ``(-q1)^2``. Identifiers ``q1..qn`` and ``p1..pn`` are phase-space
coordinates; any other identifier must be a bound parameter. Functions:
exp, log, sin, cos, sqrt.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import dual
from .dual import Dual
from .errors import DomainError, ParseError, UnknownIdentifierError

FUNCTIONS: dict[str, Callable] = {
    "exp": dual.exp,
    "log": dual.log,
    "sin": dual.sin,
    "cos": dual.cos,
    "sqrt": dual.sqrt,
}

_VAR_RE = re.compile(r"^([qp])(\d+)$")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[a-zA-Z][a-zA-Z0-9_]*)|(?P<op>[-+*/^()]))"
)

# precedence used when printing
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self):
        v = self.value
        return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True)
class Var:
    kind: str  # "q" or "p"
    index: int  # 1-based

    def __str__(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Param:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    operand: object

    def __str__(self):
        inner = str(self.operand)
        if isinstance(self.operand, (BinOp, Neg)):
            inner = f"({inner})"
        return f"-{inner}"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def __str__(self):
        p = _PREC[self.op]
        ls, rs = str(self.left), str(self.right)
        if _needs_parens(self.left, p, right_side=False, op=self.op):
            ls = f"({ls})"
        if _needs_parens(self.right, p, right_side=True, op=self.op):
            rs = f"({rs})"
        if self.op in "*/^":
            return f"{ls}{self.op}{rs}"
        return f"{ls} {self.op} {rs}"


@dataclass(frozen=True)
class Call:
    func: str
    arg: object

    def __str__(self):
        return f"{self.func}({self.arg})"


def _needs_parens(node, prec: int, right_side: bool, op: str) -> bool:
    if isinstance(node, Num) and node.value < 0:
        return True
    if not isinstance(node, BinOp):
        return False
    np_ = _PREC[node.op]
    if np_ < prec:
        return True
    if np_ == prec:
        if op == "^":
            return not right_side
        return right_side and op in "-/"
    return False


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.i = 0

    @staticmethod
    def _tokenize(text: str):
        tokens = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
            kind = m.lastgroup
            start = m.start(kind)
            tokens.append((kind, m.group(kind), start))
            pos = m.end()
        tokens.append(("end", "", len(text)))
        return tokens

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, val, pos = self.take()
        if kind != "op" or val != op:
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {op!r}, found {what}", pos, self.text)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            return _Ident(val, pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", pos, self.text)


@dataclass(frozen=True)
class _Ident:
    name: str
    pos: int


def _resolve(node, n: int, params: Mapping[str, float], problems: list):
    if isinstance(node, _Ident):
        m = _VAR_RE.match(node.name)
        if m:
            idx = int(m.group(2))
            if not 1 <= idx <= n:
                problems.append(f"variable {node.name!r} out of range for n={n} (position {node.pos})")
            return Var(m.group(1), idx)
        if node.name in params:
            return Param(node.name)
        if node.name in FUNCTIONS:
            problems.append(f"function {node.name!r} used without argument (position {node.pos})")
        else:
            problems.append(f"unknown identifier {node.name!r} (position {node.pos})")
        return Param(node.name)
    if isinstance(node, BinOp):
        return BinOp(node.op, _resolve(node.left, n, params, problems), _resolve(node.right, n, params, problems))
    if isinstance(node, Neg):
        return Neg(_resolve(node.operand, n, params, problems))
    if isinstance(node, Call):
        return Call(node.func, _resolve(node.arg, n, params, problems))
    return node


def _walk(node):
    yield node
    if isinstance(node, BinOp):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, (Neg,)):
        yield from _walk(node.operand)
    elif isinstance(node, Call):
        yield from _walk(node.arg)


def _finite(v, node):
    x = v.value if isinstance(v, Dual) else v
    if not math.isfinite(x):
        raise DomainError("non-finite result", str(node))
    return v


def _compile(node, n: int, params: Mapping[str, float]) -> Callable:
    """Turn an AST into a closure over a slot vector (q1..qn, p1..pn)."""
    if isinstance(node, Num):
        c = node.value
        return lambda v: c
    if isinstance(node, Param):
        c = float(params[node.name])
        return lambda v: c
    if isinstance(node, Var):
        slot = node.index - 1 + (n if node.kind == "p" else 0)
        return lambda v: v[slot]
    if isinstance(node, Neg):
        f = _compile(node.operand, n, params)
        return lambda v: -f(v)
    if isinstance(node, Call):
        f = _compile(node.arg, n, params)
        fn = FUNCTIONS[node.func]
        name = node.func

        def call(v):
            a = f(v)
            x = dual.value_of(a)
            if name == "log" and x <= 0:
                raise DomainError(f"log of nonpositive value {x:g}", str(node))
            if name == "sqrt" and (x < 0 or (x == 0 and isinstance(a, Dual))):
                raise DomainError(f"sqrt of {'negative' if x < 0 else 'zero (non-differentiable)'} value", str(node))
            try:
                return _finite(fn(a), node)
            except OverflowError:
                raise DomainError("overflow", str(node)) from None

        return call
    if isinstance(node, BinOp):
        lf = _compile(node.left, n, params)
        rf = _compile(node.right, n, params)
        op = node.op
        if op == "+":
            return lambda v: lf(v) + rf(v)
        if op == "-":
            return lambda v: lf(v) - rf(v)
        if op == "*":
            return lambda v: lf(v) * rf(v)
        if op == "/":
            def div(v):
                den = rf(v)
                if dual.value_of(den) == 0.0:
                    raise DomainError("division by zero", str(node))
                return lf(v) / den
            return div

        def power(v):
            b, e = lf(v), rf(v)
            bv = dual.value_of(b)
            e_const = not isinstance(e, Dual) or not e.grad.any()
            ev = dual.value_of(e)
            if e_const:
                if bv < 0 and not float(ev).is_integer():
                    raise DomainError("negative base with non-integer exponent", str(node))
                if bv == 0 and (ev < 0 or (isinstance(b, Dual) and 0 < ev < 1)):
                    raise DomainError("zero base with exponent below one", str(node))
                if isinstance(e, Dual):
                    e = ev
            elif bv <= 0:
                raise DomainError("nonpositive base with variable exponent", str(node))
            try:
                return _finite(b ** e, node)
            except OverflowError:
                raise DomainError("overflow", str(node)) from None

        return power
    raise TypeError(f"unexpected node {node!r}")


class Expression:
    """An immutable parsed expression over phase-space coordinates and parameters."""

    def __init__(self, root, n: int, params: Mapping[str, float] | None = None, source: str | None = None):
        self.root = root
        self.n = n
        self.params = dict(params or {})
        self.source = source if source is not None else str(root)
        self._fn = _compile(root, n, self.params)

    def __repr__(self):
        return f"Expression({str(self)!r}, n={self.n})"

    def __str__(self):
        return str(self.root)

    def variables(self) -> frozenset:
        """Free coordinate variables as (kind, index) pairs, e.g. ('q', 1)."""
        return frozenset((v.kind, v.index) for v in _walk(self.root) if isinstance(v, Var))

    def parameters(self) -> frozenset:
        return frozenset(v.name for v in _walk(self.root) if isinstance(v, Param))

    def depends_only_on(self, allowed) -> bool:
        return self.variables() <= set(allowed)

    @property
    def is_configuration(self) -> bool:
        return all(kind == "q" for kind, _ in self.variables())

    def _slots(self, x) -> Sequence[float]:
        x = np.asarray(x, dtype=float)
        if x.shape not in ((2 * self.n,), (self.n,)):
            raise ValueError(f"point of shape {x.shape} does not match n={self.n}")
        if x.shape[0] == self.n and not self.is_configuration:
            raise ValueError("configuration point given to an expression that depends on momenta")
        return x

    def evaluate(self, x) -> float:
        """Value at a phase point (q, p) or, for momentum-free expressions, at q."""
        v = self._fn(list(self._slots(x)))
        return _finite(float(v), self.root)

    def eval_dual(self, x) -> Dual:
        """Value and exact gradient with respect to every coordinate of the point."""
        x = self._slots(x)
        m = x.shape[0]
        eye = np.eye(m)
        v = self._fn([Dual(x[i], eye[i]) for i in range(m)])
        if not isinstance(v, Dual):
            v = Dual(v, np.zeros(m))
        return v

    __call__ = evaluate

    # composition helpers (build new expressions without re-parsing)
    def _wrap(self, other) -> tuple:
        if isinstance(other, Expression):
            if other.n != self.n:
                raise ValueError("cannot combine expressions with different n")
            return other.root, {**self.params, **other.params}
        return Num(float(other)), self.params

    def _bin(self, op, other, reverse=False):
        o, params = self._wrap(other)
        node = BinOp(op, o, self.root) if reverse else BinOp(op, self.root, o)
        return Expression(node, self.n, params)

    def __add__(self, o):
        return self._bin("+", o)

    def __radd__(self, o):
        return self._bin("+", o, True)

    def __sub__(self, o):
        return self._bin("-", o)

    def __rsub__(self, o):
        return self._bin("-", o, True)

    def __mul__(self, o):
        return self._bin("*", o)

    def __rmul__(self, o):
        return self._bin("*", o, True)

    def __truediv__(self, o):
        return self._bin("/", o)

    def __rtruediv__(self, o):
        return self._bin("/", o, True)

    def __pow__(self, o):
        return self._bin("^", o)

    def __neg__(self):
        return Expression(Neg(self.root), self.n, self.params)


def parse_expression(text: str, n: int, params: Mapping[str, float] | None = None) -> Expression:
    """Parse ``text`` into an :class:`Expression` over q1..qn, p1..pn and ``params``."""
    params = dict(params or {})
    for name in params:
        if _VAR_RE.match(name) or name in FUNCTIONS:
            raise UnknownIdentifierError(f"parameter name {name!r} clashes with a variable or function")
    raw = _Parser(text).parse()
    problems: list[str] = []
    root = _resolve(raw, n, params, problems)
    if problems:
        raise UnknownIdentifierError("; ".join(problems))
    return Expression(root, n, params, source=text)


def as_expression(e, n: int, params: Mapping[str, float] | None = None) -> Expression:
    if isinstance(e, Expression):
        return e
    if isinstance(e, (int, float)):
        return Expression(Num(float(e)), n, params)
    return parse_expression(str(e), n, params)


def constant(value: float, n: int) -> Expression:
    return Expression(Num(float(value)), n)


def variable(kind: str, index: int, n: int) -> Expression:
    return Expression(Var(kind, index), n)
