"""Recursive-descent parser for map expressions in the variable z.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary | <juxtaposed> power)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' ['-' | '+'] INT)?
    primary := NUMBER | IMAG | 'i' | 'z' | '(' expr ')'

``2z`` and ``3(z+1)`` parse as products. Exponents must be integer literals.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, ParseError

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_PRIMARY_START = {"number", "z", "i", "("}


@dataclass(frozen=True)
class Token:
    kind: str  # number | imag | z | i | op | ( | ) | end
    text: str
    offset: int
    value: complex = 0j


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _NUMBER.match(text, pos)
        if m:
            end = m.end()
            lit = m.group(0)
            # '2i' is an imaginary literal, but '2if' is not
            if end < len(text) and text[end] == "i" and not (
                end + 1 < len(text) and (text[end + 1].isalnum() or text[end + 1] == "_")
            ):
                tokens.append(Token("imag", text[pos : end + 1], pos, complex(0, float(lit))))
                pos = end + 1
            else:
                tokens.append(Token("number", lit, pos, complex(float(lit))))
                pos = end
            continue
        m = _IDENT.match(text, pos)
        if m:
            name = m.group(0)
            if name in ("z", "i"):
                tokens.append(Token(name, name, pos, 1j if name == "i" else 0j))
            else:
                raise ParseError(f"unknown identifier {name!r}", pos, {"z", "i"})
            pos = m.end()
            continue
        if ch in "+-*/^":
            tokens.append(Token("op", ch, pos))
        elif ch in "()":
            tokens.append(Token(ch, ch, pos))
        else:
            raise ParseError(f"unexpected character {ch!r}", pos)
        pos += 1
    tokens.append(Token("end", "", len(text.encode("utf-8"))))
    return tokens


# ---------------------------------------------------------------------------
# expression tree


class ExprNode:
    precedence = 100

    def evaluate(self, z):
        raise NotImplementedError

    def evaluate_with_derivative(self, z):
        raise NotImplementedError


@dataclass(frozen=True)
class Var(ExprNode):
    def evaluate(self, z):
        return z

    def evaluate_with_derivative(self, z):
        return z, np.ones_like(z) if isinstance(z, np.ndarray) else 1.0 + 0j


@dataclass(frozen=True)
class Const(ExprNode):
    value: complex

    def evaluate(self, z):
        return self.value

    def evaluate_with_derivative(self, z):
        return self.value, 0j


@dataclass(frozen=True)
class Neg(ExprNode):
    child: ExprNode
    precedence = 3

    def evaluate(self, z):
        return -self.child.evaluate(z)

    def evaluate_with_derivative(self, z):
        v, d = self.child.evaluate_with_derivative(z)
        return -v, -d


@dataclass(frozen=True)
class BinOp(ExprNode):
    op: str
    left: ExprNode
    right: ExprNode
    pole_guard: bool = field(default=False)

    @property
    def precedence(self):
        return 1 if self.op in "+-" else 2

    def evaluate(self, z):
        a = self.left.evaluate(z)
        b = self.right.evaluate(z)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        _guard_zero(b)
        return a / b

    def evaluate_with_derivative(self, z):
        a, da = self.left.evaluate_with_derivative(z)
        b, db = self.right.evaluate_with_derivative(z)
        if self.op == "+":
            return a + b, da + db
        if self.op == "-":
            return a - b, da - db
        if self.op == "*":
            return a * b, da * b + a * db
        _guard_zero(b)
        return a / b, (da * b - a * db) / (b * b)


@dataclass(frozen=True)
class Pow(ExprNode):
    base: ExprNode
    exponent: int
    precedence = 4

    @property
    def pole_guard(self):
        return self.exponent < 0

    def evaluate(self, z):
        v = self.base.evaluate(z)
        if self.exponent < 0:
            _guard_zero(v)
        return v**self.exponent

    def evaluate_with_derivative(self, z):
        v, dv = self.base.evaluate_with_derivative(z)
        k = self.exponent
        if k == 0:
            return v**0, 0j * dv
        if k < 0:
            _guard_zero(v)
        return v**k, k * v ** (k - 1) * dv


def _guard_zero(b):
    if np.any(np.asarray(b) == 0):
        raise EvaluationError("division by zero: evaluation at a pole of the expression")


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def is_op(self, chars):
        return self.tok.kind == "op" and self.tok.text in chars

    def parse(self) -> ExprNode:
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(
                f"unexpected token {self.tok.text!r}", self.tok.offset, {"+", "-", "*", "/", "^", "end"}
            )
        return node

    def expr(self):
        node = self.term()
        while self.is_op("+-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while True:
            if self.is_op("*/"):
                op = self.advance().text
                node = BinOp(op, node, self.unary(), pole_guard=(op == "/"))
            elif self.tok.kind in _PRIMARY_START | {"imag"}:
                node = BinOp("*", node, self.power())
            else:
                return node

    def unary(self):
        if self.is_op("-"):
            self.advance()
            return Neg(self.unary())
        if self.is_op("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.is_op("^"):
            self.advance()
            sign = 1
            if self.is_op("+-"):
                sign = -1 if self.advance().text == "-" else 1
            t = self.tok
            if t.kind != "number":
                if t.kind == "end":
                    raise ParseError("missing exponent", t.offset, {"integer"})
                raise ParseError("exponent must be an integer literal", t.offset, {"integer"})
            if not re.fullmatch(r"\d+", t.text):
                raise ParseError(f"non-integer exponent {t.text!r}", t.offset, {"integer"})
            self.advance()
            base = Pow(base, sign * int(t.text))
            if self.is_op("^"):
                raise ParseError("chained exponents need parentheses", self.tok.offset, {"(", "end"})
        return base

    def primary(self):
        t = self.tok
        if t.kind in ("number", "imag", "i"):
            self.advance()
            return Const(t.value)
        if t.kind == "z":
            self.advance()
            return Var()
        if t.kind == "(":
            self.advance()
            node = self.expr()
            if self.tok.kind != ")":
                raise ParseError("unbalanced parenthesis", self.tok.offset, {")"})
            self.advance()
            return node
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.offset, {"number", "z", "i", "(", "-"})


def parse_expression(text: str) -> ExprNode:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing


def format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def format_complex(c: complex) -> str:
    re_, im = c.real, c.imag
    if im == 0:
        return format_number(re_)
    im_txt = ("" if abs(im) == 1 else format_number(abs(im))) + "i"
    if re_ == 0:
        return ("-" if im < 0 else "") + im_txt
    return f"({format_number(re_)}{'-' if im < 0 else '+'}{im_txt})"


def _const_precedence(c: complex) -> int:
    # a bare negative literal prints with a leading '-' and so binds like unary minus
    if c.imag == 0 and c.real < 0:
        return 3
    if c.real == 0 and c.imag < 0:
        return 3
    return 100


def to_string(node: ExprNode) -> str:
    if isinstance(node, Var):
        return "z"
    if isinstance(node, Const):
        return format_complex(node.value)
    if isinstance(node, Neg):
        inner = to_string(node.child)
        if _prec(node.child) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        inner = to_string(node.base)
        if _prec(node.base) <= 4:
            inner = f"({inner})"
        return f"{inner}^{node.exponent}"
    if isinstance(node, BinOp):
        p = node.precedence
        left = to_string(node.left)
        if _prec(node.left) < p:
            left = f"({left})"
        right = to_string(node.right)
        # right operand of - and / must bind tighter; of + and * equal is fine
        if _prec(node.right) < p or (_prec(node.right) == p and node.op in "-/"):
            right = f"({right})"
        if node.op in "+-":
            return f"{left} {node.op} {right}"
        return f"{left}{node.op}{right}" if node.op == "/" else f"{left}*{right}"
    raise TypeError(node)


def _prec(node: ExprNode) -> int:
    if isinstance(node, Const):
        return _const_precedence(node.value)
    return node.precedence


def is_finite_tree(node: ExprNode) -> bool:
    if isinstance(node, Const):
        return math.isfinite(node.value.real) and math.isfinite(node.value.imag)
    for child in (getattr(node, n, None) for n in ("child", "left", "right", "base")):
        if child is not None and not is_finite_tree(child):
            return False
    return True
