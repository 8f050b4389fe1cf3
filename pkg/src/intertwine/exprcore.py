"""Expression trees for complex-valued functions of one real variable.

The node set is closed under differentiation, so derivatives of any order are
exact trees. Evaluation is pointwise and vectorised over numpy arrays.

Grammar accepted by :func:`parse`::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?        # exponent must fold to a positive integer
    atom   := NUMBER | NUMBER 'i' | 'i' | 'x' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := exp | sin | cos | sinh | cosh
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Div", "Neg", "Pow",
    "Exp", "Sin", "Cos", "Sinh", "Cosh",
    "ExprSyntaxError", "DivisionByZero",
    "parse", "differentiate", "derivatives", "evaluate", "to_text",
    "const", "add", "mul", "div", "neg", "power", "X",
]

# |denominator| at or below this counts as a division by zero
DIVISION_THRESHOLD = np.finfo(float).tiny


class ExprSyntaxError(SyntaxError):
    def __init__(self, message, text, position):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text_input = text
        self.position = position


class DivisionByZero(ZeroDivisionError):
    def __init__(self, x):
        super().__init__(f"denominator vanishes at x={x!r}")
        self.x = x


class Expr:
    """Base node. Arithmetic operators build folded trees."""

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, neg(_coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), neg(self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        if not isinstance(k, int) or k < 1:
            raise ValueError("only positive integer powers are supported")
        return power(self, k)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: complex


@dataclass(frozen=True, eq=True)
class Var(Expr):
    pass


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    factors: tuple


@dataclass(frozen=True, eq=True)
class Div(Expr):
    num: Expr
    den: Expr


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, eq=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Sinh(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Cosh(Expr):
    arg: Expr


X = Var()
ZERO = Const(0j)
ONE = Const(1 + 0j)

_UNARY = {"exp": Exp, "sin": Sin, "cos": Cos, "sinh": Sinh, "cosh": Cosh}
_NUMPY = {Exp: np.exp, Sin: np.sin, Cos: np.cos, Sinh: np.sinh, Cosh: np.cosh}


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, complex, np.number)):
        return Const(complex(value))
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


def _is_const(e, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# Smart constructors: constant folding, flattening, and Neg(Neg) stripping.
# They keep tree growth bounded under repeated differentiation.

def const(value) -> Const:
    return Const(complex(value))


def add(*terms) -> Expr:
    flat = []
    total = 0j
    for t in terms:
        parts = t.terms if isinstance(t, Add) else (t,)
        for p in parts:
            if isinstance(p, Const):
                total += p.value
            else:
                flat.append(p)
    if total != 0 or not flat:
        flat.append(Const(total))
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors) -> Expr:
    flat = []
    coef = 1 + 0j
    for f in factors:
        parts = f.factors if isinstance(f, Mul) else (f,)
        for p in parts:
            if isinstance(p, Neg):
                coef = -coef
                p = p.arg
            if isinstance(p, Const):
                coef *= p.value
            else:
                flat.append(p)
    if coef == 0:
        return ZERO
    if not flat:
        return Const(coef)
    if coef != 1:
        flat.insert(0, Const(coef))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def neg(e: Expr) -> Expr:
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return mul(Const(-e.factors[0].value), *e.factors[1:])
    return Neg(e)


def div(num: Expr, den: Expr) -> Expr:
    if _is_const(num, 0):
        return ZERO
    if isinstance(den, Const):
        if den.value == 0:
            return Div(num, den)
        return mul(Const(1 / den.value), num)
    return Div(num, den)


def power(base: Expr, k: int) -> Expr:
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** k)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * k)
    return Pow(base, k)


def _func(cls, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(complex(_NUMPY[cls](arg.value)))
    return cls(arg)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"(?P<imag>i(?![A-Za-z0-9_]))?"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", text, start)
        start = m.start(m.lastgroup)
        if m.group("num") is not None:
            value = float(m.group("num"))
            tokens.append(("num", value * 1j if m.group("imag") else complex(value), start))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), start))
        else:
            tokens.append(("op", m.group("op"), start))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, self.text, tok[2])

    def expect(self, op):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            self.fail(f"expected {op!r}", tok)

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected token")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else add(e, neg(rhs))
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.take()
            arg = self.unary()
            return arg if tok[1] == "+" else neg(arg)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            tok = self.take()
            exponent = self.unary()
            if not isinstance(exponent, Const) or exponent.value.imag != 0:
                self.fail("exponent must be a positive integer constant", tok)
            k = exponent.value.real
            if k != int(k) or k < 1:
                self.fail("exponent must be a positive integer constant", tok)
            return power(base, int(k))
        return base

    def atom(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            return Const(value)
        if kind == "name":
            if value == "x":
                return X
            if value == "i":
                return Const(1j)
            if value in _UNARY:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _func(_UNARY[value], arg)
            self.fail(f"unknown name {value!r}", tok)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.fail("expected an operand", tok)


def parse(text: str) -> Expr:
    """Parse grammar text into an expression tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------- differentiation

def differentiate(e: Expr) -> Expr:
    """Exact derivative with respect to ``x``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return add(*(differentiate(t) for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        terms = []
        for i, f in enumerate(fs):
            df = differentiate(f)
            if _is_const(df, 0):
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*terms)
    if isinstance(e, Div):
        du, dv = differentiate(e.num), differentiate(e.den)
        if _is_const(dv, 0):
            return div(du, e.den)
        return div(add(mul(du, e.den), neg(mul(e.num, dv))), power(e.den, 2))
    if isinstance(e, Neg):
        return neg(differentiate(e.arg))
    if isinstance(e, Pow):
        return mul(Const(e.exponent), power(e.base, e.exponent - 1) if e.exponent > 1 else ONE,
                   differentiate(e.base))
    da = differentiate(e.arg)
    if isinstance(e, Exp):
        return mul(da, e)
    if isinstance(e, Sin):
        return mul(da, Cos(e.arg))
    if isinstance(e, Cos):
        return neg(mul(da, Sin(e.arg)))
    if isinstance(e, Sinh):
        return mul(da, Cosh(e.arg))
    if isinstance(e, Cosh):
        return mul(da, Sinh(e.arg))
    raise TypeError(f"unknown node {e!r}")


def derivatives(e: Expr, k: int) -> list:
    """``[e, e', ..., e^(k)]``."""
    out = [e]
    for _ in range(k):
        out.append(differentiate(out[-1]))
    return out


# --------------------------------------------------------------- evaluation

def evaluate(e: Expr, x):
    """Evaluate at a real point or an array of real points.

    Returns a Python ``complex`` for scalar ``x`` and a complex ndarray otherwise.
    Shared subtrees are evaluated once per call.
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    cache = {}
    with np.errstate(over="ignore", invalid="ignore"):
        value = _eval(e, xs, cache)
    value = np.broadcast_to(value, xs.shape).astype(complex)
    return complex(value[0]) if scalar else value


def _eval(e, xs, cache):
    key = id(e)
    hit = cache.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(e, Const):
        v = np.complex128(e.value)
    elif isinstance(e, Var):
        v = xs.astype(complex)
    elif isinstance(e, Add):
        v = _eval(e.terms[0], xs, cache)
        for t in e.terms[1:]:
            v = v + _eval(t, xs, cache)
    elif isinstance(e, Mul):
        v = _eval(e.factors[0], xs, cache)
        for f in e.factors[1:]:
            v = v * _eval(f, xs, cache)
    elif isinstance(e, Div):
        den = np.broadcast_to(_eval(e.den, xs, cache), xs.shape)
        bad = np.abs(den) <= DIVISION_THRESHOLD
        if bad.any():
            raise DivisionByZero(float(xs[np.argmax(bad)]))
        v = _eval(e.num, xs, cache) / den
    elif isinstance(e, Neg):
        v = -_eval(e.arg, xs, cache)
    elif isinstance(e, Pow):
        v = _eval(e.base, xs, cache) ** e.exponent
    else:
        v = _NUMPY[type(e)](_eval(e.arg, xs, cache))
    # keep e alive so its id cannot be reused within this call
    cache[key] = (e, v)
    return v


# ------------------------------------------------------------------ printing

def _fmt_const(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real) if c.real >= 0 else f"({c.real!r})"
    if c.real == 0:
        return f"({c.imag!r}i)"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def to_text(e: Expr) -> str:
    """Render back into the parse grammar (round-trips through :func:`parse`)."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Add):
        return "(" + " + ".join(to_text(t) for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(" + "*".join(to_text(f) for f in e.factors) + ")"
    if isinstance(e, Div):
        return f"({to_text(e.num)}/{to_text(e.den)})"
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, Pow):
        return f"({to_text(e.base)}^{e.exponent})"
    return f"{type(e).__name__.lower()}({to_text(e.arg)})"
