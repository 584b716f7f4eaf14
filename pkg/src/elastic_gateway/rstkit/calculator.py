"""Arithmetic / statistics expression evaluator.

Grammar, loosest to tightest binding::

    expr   := term (('+' | '-') term)*          left-assoc
    term   := unary (('*' | '/' | '%') unary)*  left-assoc
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?                 right-assoc
    atom   := NUMBER | NAME '(' args ')' | '(' expr ')'

So ``-2^2 == -4`` and ``2^-1 == 0.5``. ``%`` is the remainder with the sign
of the dividend (C ``fmod``), ``**`` is accepted as a synonym for ``^``.
Functions: sqrt, abs, min, max, mean, std (population), pow.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

MAX_EXPRESSION_CHARS = 10_000
MAX_DEPTH = 100  # each nesting level costs several Python frames


class CalculatorError(ValueError):
    pass


class CalcSyntaxError(CalculatorError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at byte {position}")
        self.position = position


class CalcZeroDivisionError(CalculatorError):
    pass


class CalcDomainError(CalculatorError):
    pass


class CalcNonFiniteError(CalculatorError):
    pass


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    pos: int  # byte offset


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/%^(),])"
    r")"
)


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    i = 0
    n = len(src)
    while i < n:
        m = _TOKEN.match(src, i)
        if m is None or m.end() == i:
            if src[i:].strip() == "":
                break
            j = i
            while j < n and src[j].isspace():
                j += 1
            raise CalcSyntaxError(f"unexpected character {src[j]!r}", len(src[:j].encode("utf-8")))
        kind = m.lastgroup
        if kind is None:  # trailing whitespace only
            break
        start = m.start(kind)
        text = m.group(kind)
        if text == "**":
            text = "^"
        toks.append(_Tok(kind, text, len(src[:start].encode("utf-8"))))
        i = m.end()
    toks.append(_Tok("end", "", len(src.encode("utf-8"))))
    return toks


def _check(value: float) -> float:
    if not math.isfinite(value):
        raise CalcNonFiniteError("result is not finite")
    return value


def _pstd(values: list[float]) -> float:
    mu = math.fsum(values) / len(values)
    return math.sqrt(math.fsum((v - mu) ** 2 for v in values) / len(values))


def _sqrt(x: float) -> float:
    if x < 0:
        raise CalcDomainError("sqrt of a negative number")
    return math.sqrt(x)


def _pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0:
        raise CalcZeroDivisionError("zero raised to a negative power")
    try:
        return math.pow(a, b)
    except ValueError:
        raise CalcDomainError("negative base with non-integer exponent") from None
    except OverflowError:
        raise CalcNonFiniteError("result is not finite") from None


_FUNCS = {
    "sqrt": (1, 1, lambda a: _sqrt(a[0])),
    "abs": (1, 1, lambda a: abs(a[0])),
    "min": (1, None, min),
    "max": (1, None, max),
    "mean": (1, None, lambda a: math.fsum(a) / len(a)),
    "std": (1, None, _pstd),
    "pow": (2, 2, lambda a: _pow(a[0], a[1])),
}


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise CalcSyntaxError(f"expected {text!r}", self.tok.pos)
        self.i += 1

    def enter(self) -> None:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise CalcSyntaxError("expression nested too deeply", self.tok.pos)

    def expr(self) -> float:
        value = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            rhs = self.term()
            value = _check(value + rhs if op == "+" else value - rhs)
        return value

    def term(self) -> float:
        value = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/", "%"):
            op = self.take().text
            rhs = self.unary()
            if op == "*":
                value = _check(value * rhs)
            elif rhs == 0.0:
                raise CalcZeroDivisionError("division by zero" if op == "/" else "modulo by zero")
            elif op == "/":
                value = _check(value / rhs)
            else:
                value = math.fmod(value, rhs)
        return value

    def unary(self) -> float:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            self.enter()
            value = self.unary()
            self.depth -= 1
            return -value if op == "-" else value
        return self.power()

    def power(self) -> float:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            self.enter()
            exponent = self.unary()
            self.depth -= 1
            return _check(_pow(base, exponent))
        return base

    def atom(self) -> float:
        t = self.tok
        if t.kind == "num":
            self.take()
            return _check(float(t.text))
        if t.kind == "name":
            self.take()
            spec = _FUNCS.get(t.text.lower())
            if spec is None:
                raise CalcSyntaxError(f"unknown function {t.text!r}", t.pos)
            self.expect("(")
            self.enter()
            args = [self.expr()]
            while self.tok.text == ",":
                self.take()
                args.append(self.expr())
            self.depth -= 1
            self.expect(")")
            lo, hi, fn = spec
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise CalcSyntaxError(f"wrong number of arguments to {t.text}", t.pos)
            return _check(float(fn(args)))
        if t.kind == "op" and t.text == "(":
            self.take()
            self.enter()
            value = self.expr()
            self.depth -= 1
            self.expect(")")
            return value
        if t.kind == "end":
            raise CalcSyntaxError("unexpected end of expression", t.pos)
        raise CalcSyntaxError(f"unexpected token {t.text!r}", t.pos)


def eval_expression(expression: str) -> float:
    if len(expression) > MAX_EXPRESSION_CHARS:
        raise CalculatorError(f"expression longer than {MAX_EXPRESSION_CHARS} characters")
    parser = _Parser(_tokenize(expression))
    try:
        value = parser.expr()
    except RecursionError:
        raise CalcSyntaxError("expression nested too deeply", parser.tok.pos) from None
    if parser.tok.kind != "end":
        raise CalcSyntaxError(f"unexpected token {parser.tok.text!r}", parser.tok.pos)
    return _check(value)


def format_number(value: float) -> str:
    """Shortest round-tripping text; integral values print without a decimal point."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)
