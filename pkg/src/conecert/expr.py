"""Scalar expressions in x(1)..x(d) with exact value/gradient/Hessian evaluation.

The grammar (documented in docs/grammar.md) covers constants, variables
``x(i)``, the binary operators ``+ - * /``, integer powers ``^``, unary
minus, and the functions ``sin cos exp abs sqrt``.  Evaluation propagates
a second-order forward-mode carrier (value, gradient, Hessian), so all
derivatives are exact up to rounding, never finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expression", "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Func",
    "Dual2", "ExprError", "ExprSyntaxError", "UnknownIdentifier",
    "VariableIndexOutOfRange", "DomainError",
    "parse", "to_string", "eval2", "eval_value", "substitute", "variables_used",
]

FUNCTIONS = ("sin", "cos", "exp", "abs", "sqrt")


class ExprError(Exception):
    """Base class for expression parsing and evaluation errors."""


class ExprSyntaxError(ExprError):
    """Malformed input text.  ``offset`` is a 1-based character position;
    end-of-input reports ``len(text) + 1``."""

    def __init__(self, offset: int, expected: str):
        self.offset = offset
        self.expected = expected
        super().__init__(f"syntax error at offset {offset}: expected {expected}")


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier '{name}' at offset {offset}")


class VariableIndexOutOfRange(ExprError):
    def __init__(self, index: int, dim: int, offset: int):
        self.index = index
        self.dim = dim
        self.offset = offset
        super().__init__(
            f"variable index {index} at offset {offset} outside 1..{dim}")


class DomainError(ExprError):
    """Evaluation left the domain of an operation (division by zero,
    sqrt of a nonpositive number, abs differentiated at its kink, ...)."""


class Expression:
    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True)
class Add(Expression):
    lhs: Expression
    rhs: Expression


@dataclass(frozen=True)
class Sub(Expression):
    lhs: Expression
    rhs: Expression


@dataclass(frozen=True)
class Mul(Expression):
    lhs: Expression
    rhs: Expression


@dataclass(frozen=True)
class Div(Expression):
    lhs: Expression
    rhs: Expression


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: int


@dataclass(frozen=True)
class Func(Expression):
    name: str
    arg: Expression


# ---------------------------------------------------------------------------
# tokenizer / parser
# ---------------------------------------------------------------------------

_OPS = "+-*/^()"


def _tokenize(text: str):
    """Yield (kind, value, offset) with 1-based offsets."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            tokens.append(("num", text[i:j], i + 1))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i + 1))
            i = j
            continue
        if c in _OPS:
            tokens.append((c, c, i + 1))
            i += 1
            continue
        raise ExprSyntaxError(i + 1, "a number, identifier, or operator")
    tokens.append(("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, dim: int, params):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim
        # extra parameter names (e.g. "t") map to indices dim+1, dim+2, ...
        self.params = {name: dim + 1 + k for k, name in enumerate(params)}

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.take()
        if tok[0] != kind:
            raise ExprSyntaxError(tok[2], what)
        return tok

    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.parse_term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.parse_unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def parse_unary(self) -> Expression:
        if self.peek()[0] == "-":
            self.take()
            arg = self.parse_unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        return self.parse_power()

    def parse_power(self) -> Expression:
        node = self.parse_atom()
        while self.peek()[0] == "^":
            self.take()
            node = Pow(node, self.parse_int_exponent())
        return node

    def parse_int_exponent(self) -> int:
        sign = 1
        if self.peek()[0] == "-":
            self.take()
            sign = -1
        tok = self.take()
        if tok[0] != "num" or any(ch in tok[1] for ch in ".eE"):
            raise ExprSyntaxError(tok[2], "an integer exponent")
        return sign * int(tok[1])

    def parse_atom(self) -> Expression:
        tok = self.take()
        kind, value, offset = tok
        if kind == "num":
            return Const(float(value))
        if kind == "(":
            node = self.parse_expr()
            self.expect(")", "')'")
            return node
        if kind == "ident":
            if value == "x":
                self.expect("(", "'(' after 'x'")
                idx_tok = self.take()
                if idx_tok[0] != "num" or not idx_tok[1].isdigit():
                    raise ExprSyntaxError(idx_tok[2], "a variable index")
                index = int(idx_tok[1])
                self.expect(")", "')'")
                if not 1 <= index <= self.dim:
                    raise VariableIndexOutOfRange(index, self.dim, offset)
                return Var(index)
            if value in self.params:
                return Var(self.params[value])
            if value in FUNCTIONS:
                self.expect("(", f"'(' after '{value}'")
                arg = self.parse_expr()
                self.expect(")", "')'")
                return Func(value, arg)
            raise UnknownIdentifier(value, offset)
        raise ExprSyntaxError(offset, "a number, variable, or '('")


def parse(text: str, d: int, params: tuple[str, ...] = ()) -> Expression:
    """Parse ``text`` over variables x(1)..x(d).

    ``params`` adds named scalar parameters (used for the semi-infinite
    index ``t``) mapped to variable indices d+1, d+2, ...
    """
    if not text or text.isspace():
        raise ExprSyntaxError(1, "a non-empty expression")
    parser = _Parser(_tokenize(text), d, params)
    node = parser.parse_expr()
    tok = parser.peek()
    if tok[0] != "end":
        raise ExprSyntaxError(tok[2], "end of input")
    return node


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_LVL_ADD, _LVL_MUL, _LVL_UNARY, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def _level(e: Expression) -> int:
    if isinstance(e, (Add, Sub)):
        return _LVL_ADD
    if isinstance(e, (Mul, Div)):
        return _LVL_MUL
    if isinstance(e, Neg):
        return _LVL_UNARY
    if isinstance(e, Const) and e.value < 0:
        return _LVL_UNARY
    if isinstance(e, Pow):
        return _LVL_POW
    return _LVL_ATOM


def _paren(child: Expression, minimum: int) -> str:
    s = to_string(child)
    return f"({s})" if _level(child) < minimum else s


def to_string(e: Expression) -> str:
    """Render so that ``parse(to_string(e), d)`` is structurally identical."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"x({e.index})"
    if isinstance(e, Neg):
        return "-" + _paren(e.arg, _LVL_UNARY)
    if isinstance(e, Add):
        return f"{_paren(e.lhs, _LVL_ADD)} + {_paren(e.rhs, _LVL_ADD + 1)}"
    if isinstance(e, Sub):
        return f"{_paren(e.lhs, _LVL_ADD)} - {_paren(e.rhs, _LVL_ADD + 1)}"
    if isinstance(e, Mul):
        return f"{_paren(e.lhs, _LVL_MUL)}*{_paren(e.rhs, _LVL_MUL + 1)}"
    if isinstance(e, Div):
        return f"{_paren(e.lhs, _LVL_MUL)}/{_paren(e.rhs, _LVL_MUL + 1)}"
    if isinstance(e, Pow):
        return f"{_paren(e.base, _LVL_ATOM)}^{e.exponent}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"not an Expression: {e!r}")


# ---------------------------------------------------------------------------
# forward-mode evaluation
# ---------------------------------------------------------------------------


@dataclass
class Dual2:
    """Second-order forward-mode carrier: value, gradient, Hessian.

    The Hessian stays bitwise symmetric: every rule below builds it from
    symmetric pieces (``outer(g, g)``, ``outer(a, b) + outer(b, a)``).
    """

    value: float
    grad: np.ndarray
    hess: np.ndarray

    def __add__(self, o: "Dual2") -> "Dual2":
        return Dual2(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    def __sub__(self, o: "Dual2") -> "Dual2":
        return Dual2(self.value - o.value, self.grad - o.grad, self.hess - o.hess)

    def __neg__(self) -> "Dual2":
        return Dual2(-self.value, -self.grad, -self.hess)

    def __mul__(self, o: "Dual2") -> "Dual2":
        cross = np.outer(self.grad, o.grad)
        # build the rank-two part as one exactly-symmetric matrix before
        # summing, so rounding cannot break H == H.T bitwise
        sym = cross + cross.T
        hess = o.value * self.hess + self.value * o.hess + sym
        return Dual2(self.value * o.value,
                     o.value * self.grad + self.value * o.grad, hess)

    def __truediv__(self, o: "Dual2") -> "Dual2":
        if o.value == 0.0:
            raise DomainError("division by zero")
        value = self.value / o.value
        grad = (self.grad - value * o.grad) / o.value
        cross = np.outer(grad, o.grad)
        sym = cross + cross.T
        hess = (self.hess - sym - value * o.hess) / o.value
        return Dual2(value, grad, hess)


def _chain(u: Dual2, f0: float, f1: float, f2: float) -> Dual2:
    """Carrier for f(u) given f(u.value), f'(u.value), f''(u.value)."""
    return Dual2(f0, f1 * u.grad, f1 * u.hess + f2 * np.outer(u.grad, u.grad))


def _pow_dual(u: Dual2, n: int) -> Dual2:
    if n == 0:
        d = u.grad.shape[0]
        return Dual2(1.0, np.zeros(d), np.zeros((d, d)))
    if n == 1:
        return u
    if n < 0 and u.value == 0.0:
        raise DomainError("zero raised to a negative power")
    v = u.value
    return _chain(u, v ** n, n * v ** (n - 1), n * (n - 1) * v ** (n - 2))


def eval2(e: Expression, x) -> Dual2:
    """Evaluate value, gradient, and Hessian of ``e`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    return _eval2(e, x, d)


def _eval2(e: Expression, x: np.ndarray, d: int) -> Dual2:
    if isinstance(e, Const):
        return Dual2(e.value, np.zeros(d), np.zeros((d, d)))
    if isinstance(e, Var):
        grad = np.zeros(d)
        grad[e.index - 1] = 1.0
        return Dual2(x[e.index - 1], grad, np.zeros((d, d)))
    if isinstance(e, Neg):
        return -_eval2(e.arg, x, d)
    if isinstance(e, Add):
        return _eval2(e.lhs, x, d) + _eval2(e.rhs, x, d)
    if isinstance(e, Sub):
        return _eval2(e.lhs, x, d) - _eval2(e.rhs, x, d)
    if isinstance(e, Mul):
        return _eval2(e.lhs, x, d) * _eval2(e.rhs, x, d)
    if isinstance(e, Div):
        return _eval2(e.lhs, x, d) / _eval2(e.rhs, x, d)
    if isinstance(e, Pow):
        return _pow_dual(_eval2(e.base, x, d), e.exponent)
    if isinstance(e, Func):
        u = _eval2(e.arg, x, d)
        v = u.value
        if e.name == "sin":
            return _chain(u, np.sin(v), np.cos(v), -np.sin(v))
        if e.name == "cos":
            return _chain(u, np.cos(v), -np.sin(v), -np.cos(v))
        if e.name == "exp":
            ev = np.exp(v)
            return _chain(u, ev, ev, ev)
        if e.name == "sqrt":
            if v <= 0.0:
                raise DomainError("sqrt requires a strictly positive argument "
                                  "for differentiation")
            s = np.sqrt(v)
            return _chain(u, s, 0.5 / s, -0.25 / (s * v))
        if e.name == "abs":
            if v == 0.0:
                raise DomainError("abs has no derivative at 0")
            sign = 1.0 if v > 0 else -1.0
            return _chain(u, abs(v), sign, 0.0)
    raise TypeError(f"not an Expression: {e!r}")


def eval_value(e: Expression, x) -> float:
    """Value-only evaluation (allows abs at 0 and sqrt(0), which only lack
    derivatives, not values)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index - 1])
    if isinstance(e, Neg):
        return -eval_value(e.arg, x)
    if isinstance(e, Add):
        return eval_value(e.lhs, x) + eval_value(e.rhs, x)
    if isinstance(e, Sub):
        return eval_value(e.lhs, x) - eval_value(e.rhs, x)
    if isinstance(e, Mul):
        return eval_value(e.lhs, x) * eval_value(e.rhs, x)
    if isinstance(e, Div):
        denom = eval_value(e.rhs, x)
        if denom == 0.0:
            raise DomainError("division by zero")
        return eval_value(e.lhs, x) / denom
    if isinstance(e, Pow):
        base = eval_value(e.base, x)
        if e.exponent < 0 and base == 0.0:
            raise DomainError("zero raised to a negative power")
        return base ** e.exponent
    if isinstance(e, Func):
        v = eval_value(e.arg, x)
        if e.name == "sin":
            return float(np.sin(v))
        if e.name == "cos":
            return float(np.cos(v))
        if e.name == "exp":
            return float(np.exp(v))
        if e.name == "sqrt":
            if v < 0.0:
                raise DomainError("sqrt of a negative number")
            return float(np.sqrt(v))
        if e.name == "abs":
            return abs(v)
    raise TypeError(f"not an Expression: {e!r}")


def substitute(e: Expression, index: int, value: float) -> Expression:
    """Replace x(index) by the constant ``value`` (used to pin the
    semi-infinite parameter to a grid point)."""
    if isinstance(e, Var):
        return Const(value) if e.index == index else e
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, index, value))
    if isinstance(e, Add):
        return Add(substitute(e.lhs, index, value), substitute(e.rhs, index, value))
    if isinstance(e, Sub):
        return Sub(substitute(e.lhs, index, value), substitute(e.rhs, index, value))
    if isinstance(e, Mul):
        return Mul(substitute(e.lhs, index, value), substitute(e.rhs, index, value))
    if isinstance(e, Div):
        return Div(substitute(e.lhs, index, value), substitute(e.rhs, index, value))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, index, value), e.exponent)
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, index, value))
    raise TypeError(f"not an Expression: {e!r}")


def variables_used(e: Expression) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Func)):
        return variables_used(e.arg if isinstance(e, Neg) else e.arg)
    if isinstance(e, Pow):
        return variables_used(e.base)
    if isinstance(e, (Add, Sub, Mul, Div)):
        return variables_used(e.lhs) | variables_used(e.rhs)
    raise TypeError(f"not an Expression: {e!r}")
