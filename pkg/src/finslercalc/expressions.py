"""Minimal expression language for metric and covector definitions.

Grammar: numbers, variables x1..xn / y1..yn, binary + - * / ^ (right
associative power), unary minus, parentheses and sqrt(...).  That is enough
to express every built-in metric family; transcendental functions are
deliberately not provided so that jet evaluation stays small.

Expressions evaluate generically: the environment supplies floats or jets
and the tree only ever applies arithmetic both support.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .jets import Jet, smooth_sqrt


class ExpressionError(ValueError):
    """Parse or evaluation failure with source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        tok = m.group()
        if kind == "ws":
            nl = tok.count("\n")
            if nl:
                line += nl
                col = len(tok) - tok.rfind("\n")
            else:
                col += len(tok)
            continue
        if kind == "bad":
            raise ExpressionError(f"unexpected character {tok!r}", line, col)
        tokens.append(Token(kind, tok, line, col))
        col += len(tok)
    tokens.append(Token("end", "", line, col))
    return tokens


# -- AST ------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    axis: str  # 'x' or 'y'
    index: int  # 1-based
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Node"
    rhs: "Node"


@dataclass(frozen=True)
class Sqrt:
    arg: "Node"


Node = Num | Var | Neg | BinOp | Sqrt

_VAR_RE = re.compile(r"^([xy])([1-9]\d*)$")


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text: str):
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionError(f"expected {text!r}", tok.line, tok.col)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected {tok.text!r}", tok.line, tok.col)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if tok.kind == "op" and tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            # right associative, binds tighter than unary minus on the left
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text), tok.line, tok.col)
        if tok.kind == "name":
            if tok.text == "sqrt":
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Sqrt(arg)
            m = _VAR_RE.match(tok.text)
            if m:
                return Var(m.group(1), int(m.group(2)), tok.line, tok.col)
            raise ExpressionError(f"unknown identifier {tok.text!r}", tok.line, tok.col)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(
            f"unexpected {tok.text!r}" if tok.text else "unexpected end of input",
            tok.line,
            tok.col,
        )


def parse_expression(text: str) -> Node:
    """Parse ``text`` into an expression tree; errors carry line and column."""
    return _Parser(_tokenize(text)).parse()


def check_dimension(node: Node, n: int):
    """Raise if the expression refers to a coordinate beyond x_n / y_n."""
    if isinstance(node, Var):
        if node.index > n:
            raise ExpressionError(
                f"variable {node.axis}{node.index} exceeds dimension {n}",
                node.line,
                node.col,
            )
    elif isinstance(node, Neg):
        check_dimension(node.arg, n)
    elif isinstance(node, Sqrt):
        check_dimension(node.arg, n)
    elif isinstance(node, BinOp):
        check_dimension(node.lhs, n)
        check_dimension(node.rhs, n)


def evaluate(node: Node, x, y):
    """Evaluate over an environment of floats or jets."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        seq = x if node.axis == "x" else y
        return seq[node.index - 1]
    if isinstance(node, Neg):
        return -evaluate(node.arg, x, y)
    if isinstance(node, Sqrt):
        return smooth_sqrt(evaluate(node.arg, x, y))
    if isinstance(node, BinOp):
        a = evaluate(node.lhs, x, y)
        b = evaluate(node.rhs, x, y)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        if node.op == "^":
            if isinstance(b, Jet):
                raise ValueError("exponent must be a constant expression")
            if isinstance(b, float) and b.is_integer():
                b = int(b)
            return a**b
    raise TypeError(f"not an expression node: {node!r}")


def is_constant_zero(node: Node) -> bool:
    return isinstance(node, Num) and node.value == 0.0


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def unparse(node: Node) -> str:
    """Render with minimal parentheses; parse(unparse(e)) == e."""

    def wrap(child: Node, parent_prec: int, right: bool = False) -> str:
        text, prec = render(child)
        if prec < parent_prec or (prec == parent_prec and right):
            return f"({text})"
        return text

    def render(n: Node):
        if isinstance(n, Num):
            v = n.value
            return (repr(int(v)) if v.is_integer() else repr(v)), 5
        if isinstance(n, Var):
            return f"{n.axis}{n.index}", 5
        if isinstance(n, Sqrt):
            return f"sqrt({render(n.arg)[0]})", 5
        if isinstance(n, Neg):
            return f"-{wrap(n.arg, 3)}", 3
        if isinstance(n, BinOp):
            p = _PRECEDENCE[n.op]
            if n.op == "^":
                # right associative
                lhs = wrap(n.lhs, p + 1)
                rhs = wrap(n.rhs, p)
                return f"{lhs}^{rhs}", p
            # left associative: a right child of equal precedence must keep
            # its parentheses or reparsing would reshape the tree
            lhs = wrap(n.lhs, p)
            rhs = wrap(n.rhs, p, right=True)
            return f"{lhs} {n.op} {rhs}", p
        raise TypeError(f"not an expression node: {n!r}")

    return render(node)[0]
