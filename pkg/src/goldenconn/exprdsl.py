"""Coefficient expression language.

Closed-form coordinate expressions are parsed once into an immutable tree and
then evaluated over any scalar algebra: floats, numpy arrays (one entry per
sample point), first-order :class:`Dual` numbers, or duals nested inside duals
for exact second derivatives.

Grammar (EBNF)::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = "-" , unary | power ;
    power    = primary , { "^" , exponent } ;
    exponent = "-" , exponent | primary ;          (* must be variable-free *)
    primary  = number | name | func , "(" , expr , ")" | "(" , expr , ")" ;
    number   = digits , [ "." , [ digits ] ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;

Binary operators are left associative, ``^`` included, so ``x^2^3`` means
``(x^2)^3``.  Functions: sin cos tan exp log sqrt abs.  Constants: pi, sqrt5,
phi, phibar.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ArityError, DomainError, ExprSyntaxError, ParseError, UnknownIdentifier

SQRT5 = math.sqrt(5.0)
PHI = (1.0 + SQRT5) / 2.0
PHIBAR = 1.0 - PHI

CONSTANTS = {"pi": math.pi, "sqrt5": SQRT5, "phi": PHI, "phibar": PHIBAR}
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")
RESERVED = frozenset(CONSTANTS) | frozenset(FUNCTIONS)


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Const, Neg, BinOp, Pow, Call]


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Num, Const)):
        return set()
    if isinstance(e, (Neg,)):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base) | variables(e.exponent)
    return variables(e.left) | variables(e.right)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_PRIMARY_START = frozenset({"number", "identifier", "(", "-"})


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = set(coords)
        self.tokens = self._tokenize(text)
        self.i = 0

    @staticmethod
    def _tokenize(text):
        out = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ExprSyntaxError(pos, {"number", "identifier", "operator"}, text)
            start = m.start(m.lastgroup)
            out.append((m.lastgroup, m.group(m.lastgroup), start))
            pos = m.end()
        out.append(("end", "", len(text)))
        return out

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        raise ExprSyntaxError(self.peek()[2], expected, self.text)

    def is_op(self, *ops):
        kind, val, _ = self.peek()
        return kind == "op" and val in ops

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail({"operator", "end of input"})
        return e

    def expr(self):
        left = self.term()
        while self.is_op("+", "-"):
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.is_op("*", "/"):
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.is_op("-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        while self.is_op("^"):
            self.take()
            pos = self.peek()[2]
            exponent = self.exponent()
            if variables(exponent):
                raise ExprSyntaxError(pos, {"constant exponent"}, self.text)
            base = Pow(base, exponent)
        return base

    def exponent(self):
        if self.is_op("-"):
            self.take()
            return Neg(self.exponent())
        return self.primary()

    def primary(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if kind == "op" and val == "(":
            self.take()
            e = self.expr()
            if not self.is_op(")"):
                self.fail({")"})
            self.take()
            return e
        if kind == "name":
            self.take()
            if val in FUNCTIONS:
                return self.call(val)
            if val in self.coords:
                return Var(val)
            if val in CONSTANTS:
                return Const(val)
            raise UnknownIdentifier(val, pos)
        self.fail(_PRIMARY_START)

    def call(self, name):
        if not self.is_op("("):
            self.fail({"("})
        self.take()
        args = []
        if not self.is_op(")"):
            args.append(self.expr())
            while self.is_op(","):
                self.take()
                args.append(self.expr())
        if not self.is_op(")"):
            self.fail({")", ","})
        self.take()
        if len(args) != 1:
            raise ArityError(name, len(args))
        return Call(name, args[0])


def parse(text: str, coords: Sequence[str]) -> Expr:
    """Parse ``text`` into an expression tree over the given coordinate names."""
    if not text or not text.strip():
        raise ExprSyntaxError(0, _PRIMARY_START, text)
    return _Parser(text, coords).parse()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY = 3
_POW = 4
_ATOM = 5


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, Pow):
        return _POW
    return _ATOM


def _num_text(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    """Render with the minimal parentheses needed to parse back to ``e``."""
    if isinstance(e, Num):
        if e.value < 0 or math.copysign(1.0, e.value) < 0:
            return f"(-{_num_text(-e.value)})"
        return _num_text(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        if _prec(e.operand) < _UNARY:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if _prec(e.base) < _POW or (isinstance(e.base, Num) and e.base.value < 0):
            base = f"({base})"
        return f"{base}^{_exponent_text(e.exponent)}"
    p = _PREC[e.op]
    left = to_text(e.left)
    if _prec(e.left) < p:
        left = f"({left})"
    right = to_text(e.right)
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def _exponent_text(e):
    if isinstance(e, Neg):
        return "-" + _exponent_text(e.operand)
    if _prec(e) == _ATOM and not (isinstance(e, Num) and e.value < 0):
        return to_text(e)
    return f"({to_text(e)})"


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------


class Dual:
    """Forward-mode dual number ``val + sum_i der[i] * eps_i``.

    Components may be floats, numpy arrays (vectorised over sample points) or
    other duals, which gives exact higher derivatives by nesting.
    """

    __slots__ = ("val", "der")
    __array_ufunc__ = None  # keep numpy from treating a Dual as an object scalar

    def __init__(self, val, der):
        self.val = val
        self.der = tuple(der)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"

    def __neg__(self):
        return Dual(-self.val, [-d for d in self.der])

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, [a + b for a, b in zip(self.der, other.der)])
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, [a - b for a, b in zip(self.der, other.der)])
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        return Dual(other - self.val, [-d for d in self.der])

    def __mul__(self, other):
        if isinstance(other, Dual):
            a, b = self.val, other.val
            return Dual(a * b, [a * db + da * b for da, db in zip(self.der, other.der)])
        return Dual(self.val * other, [d * other for d in self.der])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            q = self.val * inv
            return Dual(q, [(da - q * db) * inv for da, db in zip(self.der, other.der)])
        inv = 1.0 / other
        return Dual(self.val * inv, [d * inv for d in self.der])

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        q = other * inv
        return Dual(q, [-(q * inv) * d for d in self.der])

    def __pow__(self, c):
        if isinstance(c, Dual):
            raise TypeError("dual exponents are not supported")
        c = float(c)
        if c == 0.0:
            return Dual(self.val**0, [0.0 * d for d in self.der])
        if c == 1.0:
            return self
        if c.is_integer():
            k = int(c)
            lower = self.val ** (k - 1)
            return Dual(lower * self.val, [(k * lower) * d for d in self.der])
        lower = self.val ** (c - 1.0)
        return Dual(lower * self.val, [(c * lower) * d for d in self.der])

    # comparisons look at the real part only
    def __lt__(self, other):
        return real_part(self) < real_part(other)

    def __le__(self, other):
        return real_part(self) <= real_part(other)

    def __gt__(self, other):
        return real_part(self) > real_part(other)

    def __ge__(self, other):
        return real_part(self) >= real_part(other)


def real_part(x):
    while isinstance(x, Dual):
        x = x.val
    return x


def _lift(fn, dfn):
    def f(x):
        if isinstance(x, Dual):
            slope = dfn(x.val)
            return Dual(f(x.val), [slope * d for d in x.der])
        return fn(x)

    return f


def _dtan(v):
    t = tan(v)
    return 1.0 + t * t


sin = _lift(np.sin, lambda v: cos(v))
cos = _lift(np.cos, lambda v: -sin(v))
tan = _lift(np.tan, _dtan)
exp = _lift(np.exp, lambda v: exp(v))
log = _lift(np.log, lambda v: 1.0 / v)
sqrt = _lift(np.sqrt, lambda v: 0.5 / sqrt(v))
absolute = _lift(np.abs, lambda v: np.sign(real_part(v)) * 1.0)

_FUNC_IMPL = {"sin": sin, "cos": cos, "tan": tan, "exp": exp, "log": log, "sqrt": sqrt, "abs": absolute}


def pow_const(x, c: float):
    if isinstance(x, Dual):
        return x**c
    if float(c).is_integer():
        return x ** int(c)
    return np.power(x, c)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _any(mask) -> bool:
    return bool(np.any(mask))


def evaluate(e: Expr, env: Mapping[str, object], memo: dict | None = None):
    """Value of ``e`` in the scalar algebra of ``env``.

    Raises DomainError for log of a non-positive number, sqrt of a negative
    number (or of zero when derivatives are requested), non-integer powers of
    a negative base, and division by zero.  ``memo`` may be shared across
    calls with the same ``env`` so that subtrees reused between expressions
    are computed once.
    """
    if memo is None:
        return _eval(e, env, None)
    key = id(e)
    hit = memo.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    value = _eval(e, env, memo)
    memo[key] = (e, value)
    return value


def _eval(e, env, memo):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ParseError(f"no value bound for coordinate {e.name!r}") from None
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -evaluate(e.operand, env, memo)
    if isinstance(e, BinOp):
        a = evaluate(e.left, env, memo)
        b = evaluate(e.right, env, memo)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if _any(real_part(b) == 0):
            raise DomainError("division by zero", to_text(e))
        return a / b
    if isinstance(e, Pow):
        c = float(_eval(e.exponent, {}, None))
        base = evaluate(e.base, env, memo)
        rb = real_part(base)
        if not c.is_integer() and _any(rb < 0):
            raise DomainError("non-integer power of a negative number", to_text(e))
        if _any(rb == 0) and (c < 0 or (isinstance(base, Dual) and c < 1 and c != 0)):
            raise DomainError("singular power at zero", to_text(e))
        return pow_const(base, c)
    arg = evaluate(e.arg, env, memo)
    ra = real_part(arg)
    if e.func == "log" and _any(ra <= 0):
        raise DomainError("log of a non-positive number", to_text(e))
    if e.func == "sqrt":
        if _any(ra < 0):
            raise DomainError("sqrt of a negative number", to_text(e))
        if isinstance(arg, Dual) and _any(ra == 0):
            raise DomainError("sqrt is not differentiable at zero", to_text(e))
    return _FUNC_IMPL[e.func](arg)


def evaluate_text(text: str, values: Mapping[str, object]):
    """Parse-and-evaluate convenience wrapper."""
    return evaluate(parse(text, list(values)), values)


# ---------------------------------------------------------------------------
# Tree builders used by code that manufactures fields
# ---------------------------------------------------------------------------


def num(v: float) -> Expr:
    v = float(v)
    return Neg(Num(-v)) if v < 0 else Num(v)


def add(a: Expr, b: Expr) -> Expr:
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    return BinOp("/", a, b)


def is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0.0
