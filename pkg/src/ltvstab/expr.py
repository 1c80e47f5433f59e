"""Time-dependent coefficient expressions.

Grammar (``^`` is right associative, unary minus binds looser than ``^``)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := unary ("^" factor)?
    unary  := "-" unary | atom
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

Identifiers: ``t``, ``pi``, ``e``, the units ``qi``, ``qj``, ``qk`` and the
functions ``sin cos exp ln abs sqrt``.  Values are quaternions; quotients are
right quotients ``a b^{-1}``.  Analytic functions act on a non-real quaternion
``a + u r`` (``u`` a unit vector) through ``f(a + i r)`` with ``i`` replaced
by ``u``.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .quaternion import Quaternion, qconj_arr, qmul_arr


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError):
    def __init__(self, message: str, t=None):
        where = "" if t is None else f" (t = {_fmt_t(t)})"
        super().__init__(message + where)
        self.t = t


def _fmt_t(t) -> str:
    a = np.atleast_1d(np.asarray(t, dtype=float))
    return f"{a[0]:g}" if a.size == 1 else f"{a[0]:g}..{a[-1]:g}"


FUNCTIONS = ("sin", "cos", "exp", "ln", "abs", "sqrt")
CONSTANTS = {
    "pi": (math.pi, 0.0, 0.0, 0.0),
    "e": (math.e, 0.0, 0.0, 0.0),
    "qi": (0.0, 1.0, 0.0, 0.0),
    "qj": (0.0, 0.0, 1.0, 0.0),
    "qk": (0.0, 0.0, 0.0, 1.0),
}


# -- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str
    value: tuple[float, float, float, float]


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


Node = Num | Var | Const | Neg | BinOp | Call


# -- tokenizer / parser ------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, constants: Mapping[str, float] | None):
        self.tokens = _tokenize(src)
        self.i = 0
        self.constants = dict(constants or {})

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        base = self.unary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text == "t":
                return Var()
            if text in self.constants:
                return Num(float(self.constants[text]))
            if text in CONSTANTS:
                return Const(text, CONSTANTS[text])
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", pos)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)


def parse(source: str, constants: Mapping[str, float] | None = None) -> "Expression":
    """Parse ``source``; ``constants`` binds extra real-valued names."""
    if not isinstance(source, str):
        source = repr(float(source))
    return Expression(_Parser(source, constants).parse(), source)


# -- rendering ---------------------------------------------------------------

def render(node: Node) -> str:
    if isinstance(node, Num):
        s = repr(float(node.value))
        return f"({s})" if node.value < 0 or s.startswith("-") else s
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Neg):
        return f"(-{render(node.operand)})"
    if isinstance(node, BinOp):
        return f"({render(node.left)} {node.op} {render(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({render(node.arg)})"
    raise TypeError(node)


# -- evaluation on quaternion arrays (N, 4) -----------------------------------

def _is_real(node: Node) -> bool:
    if isinstance(node, (Num, Var)):
        return True
    if isinstance(node, Const):
        return node.name not in ("qi", "qj", "qk")
    if isinstance(node, Neg):
        return _is_real(node.operand)
    if isinstance(node, BinOp):
        return _is_real(node.left) and _is_real(node.right)
    if isinstance(node, Call):
        return node.func == "abs" or _is_real(node.arg)
    raise TypeError(node)


def _has_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _has_var(node.operand)
    if isinstance(node, BinOp):
        return _has_var(node.left) or _has_var(node.right)
    if isinstance(node, Call):
        return _has_var(node.arg)
    return False


def _real_q(values: np.ndarray) -> np.ndarray:
    out = np.zeros(values.shape + (4,))
    out[..., 0] = values
    return out


def _qinv(b: np.ndarray, t) -> np.ndarray:
    n2 = np.sum(b * b, axis=-1)
    if np.any(n2 == 0.0):
        raise ExprDomainError("division by zero", _first_bad(t, n2 == 0.0))
    return qconj_arr(b) / n2[..., None]


def _first_bad(t, mask):
    t = np.broadcast_to(np.asarray(t, dtype=float), np.shape(mask))
    idx = np.flatnonzero(mask)
    return float(t.reshape(-1)[idx[0]]) if idx.size else None


def _analytic(q: np.ndarray, fn: Callable[[np.ndarray], np.ndarray], name: str, t) -> np.ndarray:
    vec = q[..., 1:]
    r = np.linalg.norm(vec, axis=-1)
    z = q[..., 0] + 1j * r
    with np.errstate(all="raise"):
        try:
            w = fn(z)
        except FloatingPointError:
            raise ExprDomainError(f"{name} undefined", t) from None
    bad = ~np.isfinite(w)
    if np.any(bad):
        raise ExprDomainError(f"{name} undefined", _first_bad(t, bad))
    real_pts = r == 0.0
    amb = real_pts & (np.abs(w.imag) > 0.0)
    if np.any(amb):
        raise ExprDomainError(f"{name} of a real argument outside its real domain", _first_bad(t, amb))
    safe = np.where(real_pts, 1.0, r)
    u = vec / safe[..., None]
    out = np.empty_like(q)
    out[..., 0] = w.real
    out[..., 1:] = np.where(real_pts[..., None], 0.0, u * w.imag[..., None])
    return out


def _real_fn(name, fn, t):
    def wrapped(x):
        with np.errstate(all="raise", under="ignore"):
            try:
                y = fn(x)
            except FloatingPointError:
                raise ExprDomainError(f"{name} undefined", t) from None
        return y
    return wrapped


_REAL_UNARY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
}
_COMPLEX_UNARY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
}


def _qpow(a: np.ndarray, b: np.ndarray, t) -> np.ndarray:
    b_real = np.all(b[..., 1:] == 0.0, axis=-1)
    a_real = np.all(a[..., 1:] == 0.0, axis=-1)
    if not np.all(b_real):
        ok = a_real & (a[..., 0] > 0.0) | b_real
        if not np.all(ok):
            raise ExprDomainError("non-real exponent needs a positive real base", _first_bad(t, ~ok))
        lna = _real_q(np.log(np.where(a_real & (a[..., 0] > 0), a[..., 0], 1.0)))
        general = _analytic(qmul_arr(lna, b), np.exp, "exp", t)
    else:
        general = None
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    be = b[..., 0]
    # real base, real exponent
    with np.errstate(all="raise", under="ignore"):
        try:
            base = np.where(a_real, a[..., 0], 1.0)
            rr = np.power(base, be)
        except FloatingPointError:
            raise ExprDomainError("power undefined", t) from None
    out[..., 0] = rr
    nonreal = ~a_real
    if np.any(nonreal):
        qa = np.where(nonreal[..., None], a, np.array([1.0, 1.0, 0.0, 0.0]))
        polar = _analytic(qa, lambda z: z ** be, "power", t)
        out = np.where(nonreal[..., None], polar, out)
    if general is not None:
        out = np.where(b_real[..., None], out, general)
    if not np.all(np.isfinite(out)):
        raise ExprDomainError("power overflow", _first_bad(t, ~np.all(np.isfinite(out), axis=-1)))
    return out


def _eval_q(node: Node, t: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return _real_q(np.full(t.shape, node.value))
    if isinstance(node, Var):
        return _real_q(t.astype(float))
    if isinstance(node, Const):
        return np.broadcast_to(np.array(node.value), t.shape + (4,)).copy()
    if isinstance(node, Neg):
        return -_eval_q(node.operand, t)
    if isinstance(node, BinOp):
        a = _eval_q(node.left, t)
        b = _eval_q(node.right, t)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = qmul_arr(a, b)
        elif node.op == "/":
            out = qmul_arr(a, _qinv(b, t))
        else:
            return _qpow(a, b, t)
        if not np.all(np.isfinite(out)):
            raise ExprDomainError("overflow", t)
        return out
    if isinstance(node, Call):
        q = _eval_q(node.arg, t)
        if node.func == "abs":
            return _real_q(np.linalg.norm(q, axis=-1))
        return _analytic(q, _COMPLEX_UNARY[node.func], node.func, t)
    raise TypeError(node)


def _compile_real(node: Node) -> Callable:
    """Closure evaluating a real-valued tree on floats or float arrays."""
    if isinstance(node, Num):
        v = node.value
        return lambda t: v + 0.0 * t
    if isinstance(node, Var):
        return lambda t: t + 0.0
    if isinstance(node, Const):
        v = node.value[0]
        return lambda t: v + 0.0 * t
    if isinstance(node, Neg):
        f = _compile_real(node.operand)
        return lambda t: -f(t)
    if isinstance(node, BinOp):
        f, g = _compile_real(node.left), _compile_real(node.right)
        op = node.op
        if op == "+":
            return lambda t: f(t) + g(t)
        if op == "-":
            return lambda t: f(t) - g(t)
        if op == "*":
            return lambda t: f(t) * g(t)
        if op == "/":
            def div(t):
                d = g(t)
                if np.any(d == 0.0):
                    raise ExprDomainError("division by zero", t)
                return f(t) / d
            return div

        def pw(t):
            with np.errstate(all="raise", under="ignore"):
                try:
                    return np.power(f(t), g(t))
                except FloatingPointError:
                    raise ExprDomainError("power undefined", t) from None
        return pw
    if isinstance(node, Call):
        f = _compile_real(node.arg)
        name = node.func
        fn = _REAL_UNARY[name]
        if name in ("ln", "sqrt"):
            def guarded(t):
                x = f(t)
                if name == "ln" and np.any(x <= 0.0):
                    raise ExprDomainError("ln of a non-positive value", t)
                if name == "sqrt" and np.any(x < 0.0):
                    raise ExprDomainError("sqrt of a negative value", t)
                return fn(x)
            return guarded

        def call(t):
            with np.errstate(over="raise"):
                try:
                    return fn(f(t))
                except FloatingPointError:
                    raise ExprDomainError(f"{name} overflow", t) from None
        return call
    raise TypeError(node)


_MATH_UNARY = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "abs": abs}


def _compile_real_scalar(node: Node) -> Callable:
    """Like ``_compile_real`` but on Python floats through ``math``; a few times
    faster inside ODE right-hand sides."""
    if isinstance(node, Num):
        v = float(node.value)
        return lambda t: v
    if isinstance(node, Var):
        return lambda t: t
    if isinstance(node, Const):
        v = float(node.value[0])
        return lambda t: v
    if isinstance(node, Neg):
        f = _compile_real_scalar(node.operand)
        return lambda t: -f(t)
    if isinstance(node, BinOp):
        f, g = _compile_real_scalar(node.left), _compile_real_scalar(node.right)
        op = node.op
        if op == "+":
            return lambda t: f(t) + g(t)
        if op == "-":
            return lambda t: f(t) - g(t)
        if op == "*":
            return lambda t: f(t) * g(t)
        if op == "/":
            def div(t):
                d = g(t)
                if d == 0.0:
                    raise ExprDomainError("division by zero", t)
                return f(t) / d
            return div

        def pw(t):
            try:
                v = f(t) ** g(t)
            except (OverflowError, ZeroDivisionError):
                raise ExprDomainError("power undefined", t) from None
            if isinstance(v, complex):
                raise ExprDomainError("power undefined", t)
            return v
        return pw
    if isinstance(node, Call):
        f = _compile_real_scalar(node.arg)
        name = node.func
        if name == "ln":
            def ln(t):
                x = f(t)
                if x <= 0.0:
                    raise ExprDomainError("ln of a non-positive value", t)
                return math.log(x)
            return ln
        if name == "sqrt":
            def sqrt(t):
                x = f(t)
                if x < 0.0:
                    raise ExprDomainError("sqrt of a negative value", t)
                return math.sqrt(x)
            return sqrt
        fn = _MATH_UNARY[name]

        def call(t):
            try:
                return fn(f(t))
            except OverflowError:
                raise ExprDomainError(f"{name} overflow", t) from None
        return call
    raise TypeError(node)


def _sq_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def _sq_analytic(q, fn, name, t):
    w, x, y, z = q
    r = math.sqrt(x * x + y * y + z * z)
    try:
        v = fn(complex(w, r))
    except (ValueError, OverflowError, ZeroDivisionError):
        raise ExprDomainError(f"{name} undefined", t) from None
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise ExprDomainError(f"{name} undefined", t)
    if r == 0.0:
        if v.imag != 0.0:
            raise ExprDomainError(f"{name} of a real argument outside its real domain", t)
        return (v.real, 0.0, 0.0, 0.0)
    k = v.imag / r
    return (v.real, x * k, y * k, z * k)


_SCALAR_UNARY = {
    "sin": cmath.sin,
    "cos": cmath.cos,
    "exp": cmath.exp,
    "ln": cmath.log,
    "sqrt": cmath.sqrt,
}


def _sq_pow(a, b, t):
    a_real = a[1] == a[2] == a[3] == 0.0
    if b[1] == b[2] == b[3] == 0.0:
        if a_real:
            try:
                v = math.pow(a[0], b[0])
            except (ValueError, ZeroDivisionError):
                raise ExprDomainError("power undefined", t) from None
            except OverflowError:
                raise ExprDomainError("power overflow", t) from None
            return (v, 0.0, 0.0, 0.0)
        e = b[0]
        return _sq_analytic(a, lambda z: z ** e, "power", t)
    if not (a_real and a[0] > 0.0):
        raise ExprDomainError("non-real exponent needs a positive real base", t)
    la = math.log(a[0])
    return _sq_analytic(tuple(la * c for c in b), cmath.exp, "exp", t)


def _compile_scalar_q(node: Node) -> Callable[[float], tuple]:
    """Closure evaluating a tree at one float ``t`` as a 4-tuple.

    Same semantics as the array evaluator, without numpy overhead; used by
    the integrators, which evaluate coefficients one time point at a time.
    Subtrees without ``t`` are folded to their value once.
    """
    if not isinstance(node, (Num, Var, Const)) and not _has_var(node):
        inner = _build_scalar_q(node)
        try:
            v = inner(0.0)
        except ExprError:
            return inner  # the domain error surfaces at call time
        return lambda t: v
    return _build_scalar_q(node)


def _build_scalar_q(node: Node) -> Callable[[float], tuple]:
    if isinstance(node, Num):
        v = (float(node.value), 0.0, 0.0, 0.0)
        return lambda t: v
    if isinstance(node, Var):
        return lambda t: (t, 0.0, 0.0, 0.0)
    if isinstance(node, Const):
        v = tuple(float(c) for c in node.value)
        return lambda t: v
    if isinstance(node, Neg):
        f = _compile_scalar_q(node.operand)
        return lambda t: tuple(-c for c in f(t))
    if isinstance(node, BinOp):
        f, g = _compile_scalar_q(node.left), _compile_scalar_q(node.right)
        op = node.op
        if op == "+":
            return lambda t: tuple(p + q for p, q in zip(f(t), g(t)))
        if op == "-":
            return lambda t: tuple(p - q for p, q in zip(f(t), g(t)))
        if op == "*":
            return lambda t: _sq_mul(f(t), g(t))
        if op == "/":
            def div(t):
                b = g(t)
                n2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2] + b[3] * b[3]
                if n2 == 0.0:
                    raise ExprDomainError("division by zero", t)
                return _sq_mul(f(t), (b[0] / n2, -b[1] / n2, -b[2] / n2, -b[3] / n2))
            return div
        return lambda t: _sq_pow(f(t), g(t), t)
    if isinstance(node, Call):
        f = _compile_scalar_q(node.arg)
        if node.func == "abs":
            return lambda t: (math.sqrt(sum(c * c for c in f(t))), 0.0, 0.0, 0.0)
        fn, name = _SCALAR_UNARY[node.func], node.func
        return lambda t: _sq_analytic(f(t), fn, name, t)
    raise TypeError(node)


class Expression:
    """Parsed, immutable expression tree."""

    __slots__ = ("node", "source", "is_real", "is_constant", "_real", "_real_scalar", "_scalar")

    def __init__(self, node: Node, source: str | None = None):
        self.node = node
        self.source = source if source is not None else render(node)
        self.is_real = _is_real(node)
        self.is_constant = not _has_var(node)
        self._real = _compile_real(node) if self.is_real else None
        self._real_scalar = _compile_real_scalar(node) if self.is_real else None
        self._scalar = _compile_scalar_q(node)

    def quat(self, t) -> np.ndarray:
        """Quaternion values at ``t``: shape ``t.shape + (4,)``."""
        ta = np.asarray(t, dtype=float)
        if ta.ndim == 0:
            return np.array(self.quat_scalar(float(ta)))
        return _eval_q(self.node, ta)

    def quat_scalar(self, t: float) -> tuple:
        v = self._scalar(t)
        if not all(math.isfinite(c) for c in v):
            raise ExprDomainError("overflow", t)
        return v

    def real(self, t):
        """Real part at ``t`` (fast path for real-valued trees)."""
        if self._real is not None:
            if isinstance(t, float):
                return self._real_scalar(t)
            return self._real(t)
        return self.quat(t)[..., 0]

    def __call__(self, t) -> Quaternion:
        return Quaternion.from_array(self.quat(float(t)))

    def render(self) -> str:
        return render(self.node)

    def __repr__(self) -> str:
        return f"Expression({self.source!r})"


class TimeFunction:
    """Expression bound to the half line ``[domain_start, inf)``."""

    def __init__(self, expression, domain_start: float = 0.0, constants=None):
        if not isinstance(expression, Expression):
            expression = parse(expression, constants)
        self.expression = expression
        self.domain_start = float(domain_start)

    @property
    def source(self) -> str:
        return self.expression.source

    @property
    def is_real(self) -> bool:
        return self.expression.is_real

    @property
    def is_constant(self) -> bool:
        return self.expression.is_constant

    def is_zero(self) -> bool:
        return self.is_constant and not np.any(self.expression.quat(0.0))

    def quat_scalar(self, t: float) -> tuple:
        if t < self.domain_start - 1e-12:
            raise ExprDomainError(f"t below domain start {self.domain_start:g}", t)
        return self.expression.quat_scalar(t)

    def _check(self, t):
        if isinstance(t, float):
            if t < self.domain_start - 1e-12:
                raise ExprDomainError(f"t below domain start {self.domain_start:g}", t)
            return
        if np.any(np.asarray(t) < self.domain_start - 1e-12):
            raise ExprDomainError(f"t below domain start {self.domain_start:g}", t)

    def eval(self, t: float) -> Quaternion:
        self._check(t)
        return self.expression(t)

    def quat(self, t) -> np.ndarray:
        self._check(t)
        return self.expression.quat(t)

    def real(self, t):
        self._check(t)
        return self.expression.real(t)

    def continuity_defect(self, grid, h: float = 1e-6) -> float:
        """Largest one-sided jump ``|f(t+h) - f(t)|`` over ``grid``, scaled."""
        g = np.asarray(grid, dtype=float)
        a = self.quat(g)
        b = self.quat(g + h)
        scale = max(1.0, float(np.max(np.abs(a))))
        return float(np.max(np.linalg.norm(b - a, axis=-1))) / scale

    def __repr__(self) -> str:
        return f"TimeFunction({self.source!r}, t0={self.domain_start:g})"


def evaluate(f: TimeFunction, t: float) -> Quaternion:
    return f.eval(t)
