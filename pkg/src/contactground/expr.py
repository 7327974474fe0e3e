"""Closed arithmetic expression parser and evaluator.

Model backends hand pixel coordinates back as arithmetic text such as
"100 - 120/2". Feeding that to a general-purpose interpreter would be an
injection hazard, so the grammar here accepts digits, a decimal point,
'+', '-', '*', '/', parentheses and whitespace - nothing else. No names,
no calls, no state.

Precedence is conventional ('*' and '/' bind tighter than '+' and '-'),
binary operators associate to the left, unary minus may nest.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .errors import ExpressionEvalError, ExpressionParseError

__all__ = ["Num", "Neg", "Group", "BinOp", "ExprAst", "parse", "evaluate"]

# Parenthesis/unary nesting beyond this raises a positioned parse error
# instead of exhausting the interpreter stack on adversarial input.
MAX_NESTING = 100


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"


@dataclass(frozen=True)
class Group:
    inner: "ExprAst"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "ExprAst"
    right: "ExprAst"


ExprAst = Union[Num, Neg, Group, BinOp]

_TOKEN = re.compile(r"[ \t\r\n]*(?:(\d+\.\d*|\.\d+|\d+)|([+\-*/()]))")
_WS = re.compile(r"[ \t\r\n]*")


class _Tokens:
    """Single-pass scanner producing (kind, text, position) triples."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.current: tuple[str, str, int] | None = None
        self._advance()

    def _advance(self) -> None:
        m = _TOKEN.match(self.text, self.pos)
        if m is None:
            ws = _WS.match(self.text, self.pos)
            end = ws.end() if ws else self.pos
            if end >= len(self.text):
                self.current = ("end", "", len(self.text))
                self.pos = len(self.text)
                return
            raise ExpressionParseError(
                f"unexpected character {self.text[end]!r}", end
            )
        number, symbol = m.group(1), m.group(2)
        start = m.end() - len(number or symbol)
        self.current = ("num", number, start) if number else ("sym", symbol, start)
        self.pos = m.end()

    def take(self) -> tuple[str, str, int]:
        tok = self.current
        assert tok is not None
        self._advance()
        return tok


def parse(text: str) -> ExprAst:
    """Parse expression text into an AST or raise a positioned error."""
    tokens = _Tokens(text)
    if tokens.current[0] == "end":
        raise ExpressionParseError("empty input", 0)
    ast = _parse_expr(tokens, 0)
    kind, value, pos = tokens.current
    if kind != "end":
        if value == ")":
            raise ExpressionParseError("unbalanced ')'", pos)
        raise ExpressionParseError(f"unexpected token {value!r}", pos)
    return ast


def _parse_expr(tokens: _Tokens, depth: int) -> ExprAst:
    node = _parse_term(tokens, depth)
    while tokens.current[:2] in (("sym", "+"), ("sym", "-")):
        _, op, _ = tokens.take()
        node = BinOp(op, node, _parse_term(tokens, depth))
    return node


def _parse_term(tokens: _Tokens, depth: int) -> ExprAst:
    node = _parse_factor(tokens, depth)
    while tokens.current[:2] in (("sym", "*"), ("sym", "/")):
        _, op, _ = tokens.take()
        node = BinOp(op, node, _parse_factor(tokens, depth))
    return node


def _parse_factor(tokens: _Tokens, depth: int) -> ExprAst:
    if depth > MAX_NESTING:
        raise ExpressionParseError("expression nested too deeply", tokens.current[2])
    kind, value, pos = tokens.current
    if kind == "sym" and value == "-":
        tokens.take()
        return Neg(_parse_factor(tokens, depth + 1))
    return _parse_primary(tokens, depth)


def _parse_primary(tokens: _Tokens, depth: int) -> ExprAst:
    kind, value, pos = tokens.take()
    if kind == "num":
        return Num(float(value))
    if kind == "sym" and value == "(":
        inner = _parse_expr(tokens, depth + 1)
        kind, value, pos = tokens.take()
        if kind != "sym" or value != ")":
            raise ExpressionParseError("unbalanced '('", pos)
        return Group(inner)
    if kind == "end":
        raise ExpressionParseError("unexpected end of input", pos)
    raise ExpressionParseError(f"unexpected token {value!r}", pos)


def evaluate(ast: ExprAst) -> float:
    """Evaluate an AST under double-precision real arithmetic.

    Iterative post-order walk: parse() happily builds very long left-leaning
    chains ("1+1+1+..."), which naive recursion could not evaluate.
    """
    stack: list[tuple[ExprAst, bool]] = [(ast, False)]
    values: list[float] = []
    while stack:
        node, ready = stack.pop()
        if isinstance(node, Num):
            values.append(node.value)
        elif isinstance(node, Group):
            stack.append((node.inner, False))
        elif isinstance(node, Neg):
            if ready:
                values.append(-values.pop())
            else:
                stack.append((node, True))
                stack.append((node.operand, False))
        else:
            if ready:
                right = values.pop()
                left = values.pop()
                if node.op == "+":
                    values.append(left + right)
                elif node.op == "-":
                    values.append(left - right)
                elif node.op == "*":
                    values.append(left * right)
                else:
                    if right == 0.0:
                        raise ExpressionEvalError("division by zero")
                    values.append(left / right)
            else:
                stack.append((node, True))
                stack.append((node.right, False))
                stack.append((node.left, False))
    return values[0]
