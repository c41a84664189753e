"""Kernel expression language: parsing, evaluation, d/du.

Kernels k(x,y), g(x,y) and h(x,y,u) are written as plain text formulas over
the fixed variable set {x1, x2, y1, y2, u} ("x" and "y" are accepted as
aliases for x1 and y1).  The grammar is

    expr    := term (("+"|"-") term)*
    term    := unary (("*"|"/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" unary)?
    primary := NUMBER | IDENT | FUNC "(" expr ")" | "(" expr ")"

with functions sin, cos, exp, tanh, abs and sign.  "^" binds tighter than
unary minus and is right-associative, so -x^2 parses as -(x^2) and 2^-3 is
legal.  Power exponents must not depend on u.

Derivatives with respect to u are symbolic trees built by the usual rules;
they are not simplified.  abs is differentiated as sign with sign(0) = 0.
sign itself differentiates to 0 (the kink set has measure zero and test
kernels avoid it).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

VARIABLES = ("x1", "x2", "y1", "y2", "u")
ALIASES = {"x": "x1", "y": "y1"}
FUNCTIONS = ("sin", "cos", "exp", "tanh", "abs", "sign")
UNARY_OPS = ("neg",) + FUNCTIONS
BINARY_OPS = ("+", "-", "*", "/", "^")


class ParseError(ValueError):
    """Malformed expression source; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    """Identifier outside the variable/function sets."""

    def __init__(self, name: str, position: int):
        ParseError.__init__(self, f"unknown identifier '{name}'", position)
        self.name = name


class MissingBindingError(ValueError):
    """A free variable of the expression has no value bound."""


class NumericDomainError(ArithmeticError):
    """Division by zero or a power outside the real domain (0^negative, neg^fractional)."""


class DifferentiationError(ValueError):
    """Raised when a power exponent depends on u."""


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str

    def __post_init__(self):
        if self.name not in VARIABLES:
            raise ValueError(f"variable name must be one of {VARIABLES}, got {self.name!r}")


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary op {self.op!r}")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary op {self.op!r}")


Expr = Union[Constant, Variable, Unary, Binary]


def free_variables(expr: Expr) -> frozenset[str]:
    """Set of variable names occurring in the expression."""
    if isinstance(expr, Constant):
        return frozenset()
    if isinstance(expr, Variable):
        return frozenset((expr.name,))
    if isinstance(expr, Unary):
        return free_variables(expr.child)
    return free_variables(expr.left) | free_variables(expr.right)


def uses_u(expr: Expr) -> bool:
    return "u" in free_variables(expr)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>[-+*/^()])
      | (?P<ws>\s+)""",
    re.VERBOSE,
)

_Token = tuple[str, str, int]  # (kind, text, position)


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect_op(self, text: str) -> _Token:
        kind, tok_text, pos = self.peek()
        if kind != "op" or tok_text != text:
            raise ParseError(f"expected {text!r}", pos)
        return self.advance()

    def parse(self) -> Expr:
        expr = self.expr()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {text!r}", pos)
        return expr

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            _, _, caret_pos = self.advance()
            exponent = self.unary()
            if uses_u(exponent):
                raise ParseError("power exponent must not depend on u", caret_pos)
            return Binary("^", base, exponent)
        return base

    def primary(self) -> Expr:
        kind, text, pos = self.peek()
        if kind == "number":
            self.advance()
            return Constant(float(text))
        if kind == "name":
            self.advance()
            name = ALIASES.get(text, text)
            if name in FUNCTIONS:
                if not (self.peek()[0] == "op" and self.peek()[1] == "("):
                    raise ParseError(f"function '{text}' requires parenthesized argument", pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Unary(name, arg)
            if name in VARIABLES:
                if self.peek()[0] == "op" and self.peek()[1] == "(":
                    raise ParseError(f"variable '{text}' is not callable", self.peek()[2])
                return Variable(name)
            raise UnknownIdentifierError(text, pos)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "eof":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected {text!r}", pos)


def parse(source: str) -> Expr:
    """Parse a kernel formula into an expression tree.

    Raises ParseError (with .position) on malformed input and
    UnknownIdentifierError on names outside the variable/function sets.
    """
    return _Parser(source).parse()


def to_source(expr: Expr) -> str:
    """Render a tree back to parseable source (fully parenthesized)."""
    if isinstance(expr, Constant):
        return repr(expr.value)
    if isinstance(expr, Variable):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == "neg":
            return f"(-{to_source(expr.child)})"
        return f"{expr.op}({to_source(expr.child)})"
    return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _pow_scalar(base: float, exponent: float) -> float:
    if base == 0.0 and exponent < 0.0:
        raise NumericDomainError(f"0.0 raised to negative power {exponent}")
    try:
        return math.pow(base, exponent)
    except ValueError as exc:  # negative base, fractional exponent
        raise NumericDomainError(f"pow({base}, {exponent}) is not real") from exc
    except OverflowError:
        negative = base < 0.0 and float(exponent).is_integer() and int(exponent) % 2 == 1
        return -math.inf if negative else math.inf


def evaluate(expr: Expr, bindings: dict[str, float]) -> float:
    """Evaluate at a scalar binding of the free variables (IEEE-754 doubles)."""
    if isinstance(expr, Constant):
        return float(expr.value)
    if isinstance(expr, Variable):
        try:
            return float(bindings[expr.name])
        except KeyError:
            raise MissingBindingError(f"no value bound for variable '{expr.name}'") from None
    if isinstance(expr, Unary):
        c = evaluate(expr.child, bindings)
        if expr.op == "neg":
            return -c
        if expr.op == "sin":
            return math.sin(c)
        if expr.op == "cos":
            return math.cos(c)
        if expr.op == "exp":
            try:
                return math.exp(c)
            except OverflowError:
                return math.inf
        if expr.op == "tanh":
            return math.tanh(c)
        if expr.op == "abs":
            return abs(c)
        return 0.0 if c == 0.0 else math.copysign(1.0, c)  # sign
    left = evaluate(expr.left, bindings)
    right = evaluate(expr.right, bindings)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if expr.op == "/":
        try:
            return left / right
        except ZeroDivisionError:
            raise NumericDomainError(f"division by zero: {left} / 0.0") from None
    return _pow_scalar(left, right)


def _eval_array(expr: Expr, bindings: dict) -> np.ndarray | float:
    if isinstance(expr, Constant):
        return float(expr.value)
    if isinstance(expr, Variable):
        try:
            return bindings[expr.name]
        except KeyError:
            raise MissingBindingError(f"no value bound for variable '{expr.name}'") from None
    if isinstance(expr, Unary):
        c = _eval_array(expr.child, bindings)
        if expr.op == "neg":
            return np.negative(c)
        if expr.op == "sign":
            return np.sign(c)
        return getattr(np, expr.op if expr.op != "abs" else "abs")(c)
    left = _eval_array(expr.left, bindings)
    right = _eval_array(expr.right, bindings)
    if expr.op == "+":
        return np.add(left, right)
    if expr.op == "-":
        return np.subtract(left, right)
    if expr.op == "*":
        return np.multiply(left, right)
    if expr.op == "/":
        return np.divide(left, right)
    return np.power(left, right)


def evaluate_array(expr: Expr, bindings: dict, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Vectorized evaluation with numpy broadcasting.

    Bindings may mix scalars and arrays; the result is broadcast to `shape`
    when given.  Domain violations (division by zero, 0^negative,
    negative^fractional) raise NumericDomainError; exp overflow saturates to
    inf, matching the scalar evaluator.
    """
    with np.errstate(divide="raise", invalid="raise", over="ignore", under="ignore"):
        try:
            value = _eval_array(expr, bindings)
        except FloatingPointError as exc:
            raise NumericDomainError(f"domain error evaluating expression: {exc}") from exc
    out = np.asarray(value, dtype=np.float64)
    if shape is not None and out.shape != shape:
        out = np.array(np.broadcast_to(out, shape), dtype=np.float64)
    return out


# ---------------------------------------------------------------------------
# Symbolic d/du
# ---------------------------------------------------------------------------

_ZERO = Constant(0.0)
_ONE = Constant(1.0)


def differentiate_u(expr: Expr) -> Expr:
    """Partial derivative with respect to u, as an unsimplified tree.

    Expressions without u differentiate to a tree that evaluates to 0.
    abs'(z) is sign(z) with sign(0) = 0; sign'(z) is 0.
    """
    if isinstance(expr, Constant):
        return _ZERO
    if isinstance(expr, Variable):
        return _ONE if expr.name == "u" else _ZERO
    if isinstance(expr, Unary):
        d = differentiate_u(expr.child)
        c = expr.child
        if expr.op == "neg":
            return Unary("neg", d)
        if expr.op == "sin":
            return Binary("*", Unary("cos", c), d)
        if expr.op == "cos":
            return Binary("*", Unary("neg", Unary("sin", c)), d)
        if expr.op == "exp":
            return Binary("*", Unary("exp", c), d)
        if expr.op == "tanh":
            return Binary("*", Binary("-", _ONE, Binary("^", Unary("tanh", c), Constant(2.0))), d)
        if expr.op == "abs":
            return Binary("*", Unary("sign", c), d)
        return _ZERO  # sign
    dl = differentiate_u(expr.left)
    dr = differentiate_u(expr.right)
    if expr.op == "+":
        return Binary("+", dl, dr)
    if expr.op == "-":
        return Binary("-", dl, dr)
    if expr.op == "*":
        return Binary("+", Binary("*", dl, expr.right), Binary("*", expr.left, dr))
    if expr.op == "/":
        numerator = Binary("-", Binary("*", dl, expr.right), Binary("*", expr.left, dr))
        return Binary("/", numerator, Binary("^", expr.right, Constant(2.0)))
    # power: exponent must be u-free
    if uses_u(expr.right):
        raise DifferentiationError("cannot differentiate a power whose exponent depends on u")
    if isinstance(expr.right, Constant) and expr.right.value == 0.0:
        return _ZERO
    lowered = Binary("^", expr.left, Binary("-", expr.right, _ONE))
    return Binary("*", Binary("*", expr.right, lowered), dl)
