"""A tiny arithmetic language for user-supplied objectives ``F(x)``.

Grammar (Pratt parser, loosest to tightest binding)::

    expr   := expr ('+' | '-') expr
            | expr ('*' | '/') expr
            | expr '^' expr            (right associative)
            | '-' expr                 (binds tighter than '^')
            | NUMBER | 'x' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'

    FUNC   := exp | ln | sqrt | abs | sin | cos

There is no implicit multiplication; ``2x`` is a parse error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import ExpressionDomainError, ParseError, UnknownIdentifier

FUNCTIONS = ("exp", "ln", "sqrt", "abs", "sin", "cos")
CONSTANTS = {"pi": math.pi, "e": math.e}

_MAX_DEPTH = 200


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str = "x"


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "ExprAst"


ExprAst = Union[Number, Variable, Constant, Unary, Binary, Call]

# left binding powers; '^' is right associative, unary minus sits above it
_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_BP = 40

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte_off = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(byte_off, "a number, identifier, operator or parenthesis",
                             f"at offset {byte_off}: unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), byte_off))
        byte_off += len(m.group().encode("utf-8"))
        pos = m.end()
    tokens.append(_Token("end", "", byte_off))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise ParseError(self.tok.offset, repr(text))
        self.advance()

    def expression(self, rbp: int = 0) -> ExprAst:
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            raise ParseError(self.tok.offset, "shallower nesting",
                             f"at offset {self.tok.offset}: expression nested too deeply")
        left = self.nud(self.advance())
        while self.tok.kind == "op" and _BINARY_BP.get(self.tok.text, 0) > rbp:
            op = self.advance().text
            bp = _BINARY_BP[op]
            right = self.expression(bp - 1 if op == "^" else bp)
            left = Binary(op, left, right)
        self.depth -= 1
        return left

    def nud(self, t: _Token) -> ExprAst:
        if t.kind == "num":
            return Number(float(t.text))
        if t.kind == "ident":
            if t.text == "x":
                return Variable("x")
            if t.text in CONSTANTS:
                return Constant(t.text)
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                self.expect(")")
                return Call(t.text, arg)
            raise UnknownIdentifier(t.offset, t.text)
        if t.kind == "op" and t.text == "-":
            return Unary("-", self.expression(_UNARY_BP))
        if t.kind == "op" and t.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        raise ParseError(t.offset, "a number, x, constant, function call, '-' or '('")


def parse(text: str) -> ExprAst:
    """Parse ``text`` into an AST; raises ``ParseError`` on any malformed input."""
    if not isinstance(text, str):
        raise ParseError(0, "a string")
    p = _Parser(text)
    ast = p.expression()
    if p.tok.kind != "end":
        raise ParseError(p.tok.offset, "an operator or end of input")
    return ast


def _pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except ZeroDivisionError:
        raise ExpressionDomainError(f"{a!r} ^ {b!r}: zero to a negative power") from None
    except ValueError:
        if math.isnan(a) or math.isnan(b):
            return math.nan
        raise ExpressionDomainError(f"{a!r} ^ {b!r}: negative base with fractional exponent") from None
    except OverflowError:
        if a < 0 and float(b).is_integer() and int(b) % 2 == 1:
            return -math.inf
        return math.inf


def _call(name: str, v: float) -> float:
    if name == "exp":
        try:
            return math.exp(v)
        except OverflowError:
            return math.inf
    if name == "ln":
        if v <= 0:
            raise ExpressionDomainError(f"ln({v!r}) undefined")
        return math.log(v)
    if name == "sqrt":
        if v < 0:
            raise ExpressionDomainError(f"sqrt({v!r}) undefined")
        return math.sqrt(v)
    if name == "abs":
        return abs(v)
    if name in ("sin", "cos"):
        if math.isinf(v):
            raise ExpressionDomainError(f"{name}({v!r}) undefined")
        return math.sin(v) if name == "sin" else math.cos(v)
    raise UnknownIdentifier(0, name)


def eval_expr(ast: ExprAst, x: float) -> float:
    if isinstance(ast, Number):
        return ast.value
    if isinstance(ast, Variable):
        return float(x)
    if isinstance(ast, Constant):
        return CONSTANTS[ast.name]
    if isinstance(ast, Unary):
        return -eval_expr(ast.operand, x)
    if isinstance(ast, Call):
        return _call(ast.name, eval_expr(ast.arg, x))
    if isinstance(ast, Binary):
        a = eval_expr(ast.left, x)
        b = eval_expr(ast.right, x)
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            if b == 0:
                raise ExpressionDomainError("division by zero")
            return a / b
        return _pow(a, b)
    raise TypeError(f"not an expression node: {ast!r}")


def to_text(ast: ExprAst) -> str:
    """Fully parenthesized rendering that ``parse`` maps back to an equal AST."""
    if isinstance(ast, Number):
        return repr(ast.value)
    if isinstance(ast, (Variable, Constant)):
        return ast.name
    if isinstance(ast, Unary):
        return f"(-{to_text(ast.operand)})"
    if isinstance(ast, Call):
        return f"{ast.name}({to_text(ast.arg)})"
    return f"({to_text(ast.left)} {ast.op} {to_text(ast.right)})"


_NP_CALLS = {"exp": "exp", "ln": "log", "sqrt": "sqrt", "abs": "abs", "sin": "sin", "cos": "cos"}


def eval_many(ast: ExprAst, xs):
    """Vectorized evaluation; domain violations show up as nan or inf instead of raising."""
    import numpy as np

    def go(node):
        if isinstance(node, Number):
            return np.full(xs.shape, node.value)
        if isinstance(node, Variable):
            return xs
        if isinstance(node, Constant):
            return np.full(xs.shape, CONSTANTS[node.name])
        if isinstance(node, Unary):
            return -go(node.operand)
        if isinstance(node, Call):
            return getattr(np, _NP_CALLS[node.name])(go(node.arg))
        a, b = go(node.left), go(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return np.where(b == 0, np.nan, a / np.where(b == 0, 1.0, b))
        return np.power(a, b)

    xs = np.asarray(xs, dtype=float)
    with np.errstate(all="ignore"):
        return go(ast)
