"""Small arithmetic expression language used throughout the package.

Expressions define vector fields, domain predicates, and closed-form flow
maps inside config files.  The grammar is frozen (see docs/expressions.md):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          right associative
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus on its left (``-x1^2`` is ``-(x1^2)``)
while the exponent itself may carry a sign (``x1^-2``).  Whitespace is
insignificant.  Numeric literals are non-negative by construction; unary
minus owns the sign.

Two variable conventions share one parser.  Vector fields and predicates
are written over ``t, x1..xn``; flow maps are written over
``tau, sigma, a1..an``.  ``parse`` accepts either spelling, and
``validate`` / ``validate_family`` enforce the convention for a given
context and dimension.  Any other identifier is rejected at parse time.

Everything here is immutable and pure, so expressions can be shared freely
across threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Union

__all__ = [
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "Expression",
    "ParseError",
    "EvalError",
    "ValidationError",
    "FUNCTIONS",
    "parse",
    "evaluate_expr",
    "evaluate_family",
    "validate",
    "validate_family",
    "pretty_print",
    "format_number",
    "variables",
]


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, Bin, Call]

FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
    "tanh": math.tanh,
}

# t/x for field expressions, tau/sigma/a for family expressions; indices
# start at 1, no leading zeros.
_VAR_RE = re.compile(r"(?:t|tau|sigma|[xa][1-9][0-9]*)\Z")


class ParseError(ValueError):
    """Syntax error; ``offset`` is the byte offset into the source."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset
        self.message = message


class EvalError(ArithmeticError):
    """Runtime evaluation failure.

    ``kind`` is one of ``division_by_zero``, ``domain`` (log/sqrt of a
    negative, fractional power of a negative base), ``nonfinite``
    (overflow to inf or nan).
    """

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class ValidationError(ValueError):
    """A variable falls outside the declared convention or dimension."""

    def __init__(self, variable: str, message: str | None = None):
        super().__init__(message or f"variable '{variable}' not allowed here")
        self.variable = variable


# ---------------------------------------------------------------------------
# Tokenizer

_OPS = set("+-*/^()")


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | eof
    text: str
    offset: int


def _byte_offset(source: str, index: int) -> int:
    # offsets are reported in bytes so editors can seek; identical to the
    # character index for plain ASCII input
    return len(source[:index].encode("utf-8"))


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c in " \t\r\n":
            i += 1
            continue
        start = i
        if c.isdigit():
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == "." and i + 1 < n and source[i + 1].isdigit():
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            # exponent part only when it is actually followed by digits,
            # so "2e" lexes as number then identifier
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
            tokens.append(_Token("num", source[start:i], _byte_offset(source, start)))
            continue
        if c.isalpha() or c == "_":
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(_Token("ident", source[start:i], _byte_offset(source, start)))
            continue
        if c in _OPS:
            tokens.append(_Token("op", c, _byte_offset(source, start)))
            i += 1
            continue
        raise ParseError(_byte_offset(source, i), f"unexpected character '{c}'")
    tokens.append(_Token("eof", "", _byte_offset(source, n)))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent, grammar above)

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expr(self) -> Expression:
        left = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            left = Bin(op, left, self.term())
        return left

    def term(self) -> Expression:
        left = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            left = Bin(op, left, self.factor())
        return left

    def factor(self) -> Expression:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return Bin("^", base, self.factor())
        return base

    def atom(self) -> Expression:
        tok = self.advance()
        if tok.kind == "eof":
            raise ParseError(tok.offset, "unexpected end of input")
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise ParseError(tok.offset, f"unknown function '{tok.text}'")
                self.advance()
                arg = self.expr()
                self._expect_rparen()
                return Call(tok.text, arg)
            if _VAR_RE.match(tok.text):
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                raise ParseError(tok.offset, f"expected '(' after function name '{tok.text}'")
            raise ParseError(tok.offset, f"bad variable name '{tok.text}'")
        if tok.kind == "op" and tok.text == "(":
            inner = self.expr()
            self._expect_rparen()
            return inner
        raise ParseError(tok.offset, f"unexpected token '{tok.text}'")

    def _expect_rparen(self) -> None:
        tok = self.peek()
        if tok.kind == "op" and tok.text == ")":
            self.advance()
            return
        raise ParseError(tok.offset, "unbalanced parenthesis: expected ')'")


def parse(source: str) -> Expression:
    """Parse ``source`` into an expression tree.

    Raises ParseError (with a byte offset and message) on any syntax
    problem: unexpected token, truncated input, unbalanced parenthesis,
    unknown function, bad variable name.  Pure: identical input always
    yields an identical tree.
    """
    parser = _Parser(_tokenize(source))
    tree = parser.expr()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(tok.offset, f"unexpected token '{tok.text}'")
    return tree


# ---------------------------------------------------------------------------
# Evaluation

def _eval(e: Expression, scalars: dict, vectors: dict) -> float:
    if isinstance(e, Bin):
        a = _eval(e.left, scalars, vectors)
        b = _eval(e.right, scalars, vectors)
        op = e.op
        if op == "+":
            v = a + b
        elif op == "-":
            v = a - b
        elif op == "*":
            v = a * b
        elif op == "/":
            if b == 0.0:
                raise EvalError("division_by_zero", "division by zero")
            v = a / b
        else:  # ^
            if a == 0.0 and b < 0.0:
                raise EvalError("division_by_zero", "zero base with negative exponent")
            if a < 0.0 and not float(b).is_integer():
                raise EvalError("domain", "fractional power of negative base")
            try:
                v = math.pow(a, b)
            except OverflowError:
                raise EvalError("nonfinite", "overflow in power") from None
        if not math.isfinite(v):
            raise EvalError("nonfinite", f"non-finite result from '{op}'")
        return v
    if isinstance(e, Var):
        name = e.name
        if name in scalars:
            return scalars[name]
        vec = vectors.get(name[0])
        if vec is None:
            raise ValueError(f"unknown variable '{name}' in this context; validate first")
        k = int(name[1:])
        if k > len(vec):
            raise ValueError(f"variable '{name}' exceeds dimension {len(vec)}; validate first")
        return float(vec[k - 1])
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Call):
        a = _eval(e.arg, scalars, vectors)
        if e.fn == "log":
            if a <= 0.0:
                raise EvalError("domain", "log of non-positive value")
            return math.log(a)
        if e.fn == "sqrt":
            if a < 0.0:
                raise EvalError("domain", "sqrt of negative value")
            return math.sqrt(a)
        try:
            v = FUNCTIONS[e.fn](a)
        except OverflowError:
            raise EvalError("nonfinite", f"overflow in {e.fn}") from None
        if not math.isfinite(v):
            raise EvalError("nonfinite", f"non-finite result from {e.fn}")
        return v
    if isinstance(e, Neg):
        return -_eval(e.operand, scalars, vectors)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate_expr(e: Expression, t: float, x) -> float:
    """Evaluate a field/predicate expression at time ``t`` and state ``x``.

    ``e`` must have been validated against ``len(x)``.  Raises EvalError
    on division by zero, domain violations, or non-finite results.
    """
    return _eval(e, {"t": float(t)}, {"x": x})


def evaluate_family(e: Expression, tau: float, sigma: float, a) -> float:
    """Evaluate a flow-map expression at parameters (tau, sigma) and state ``a``."""
    return _eval(e, {"tau": float(tau), "sigma": float(sigma)}, {"a": a})


# ---------------------------------------------------------------------------
# Validation

def variables(e: Expression) -> Iterator[str]:
    """Yield every variable name occurring in ``e`` (with repetitions)."""
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            yield node.name
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, Bin):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Call):
            stack.append(node.arg)
        elif not isinstance(node, Num):
            raise TypeError(f"not an expression node: {node!r}")


def _check_vars(e: Expression, scalar_names: tuple, prefix: str, n: int) -> None:
    for name in variables(e):
        if name in scalar_names:
            continue
        if name[0] == prefix and int(name[1:]) <= n:
            continue
        raise ValidationError(name, f"variable '{name}' not allowed (dimension {n})")


def validate(e: Expression, n: int) -> None:
    """Check that ``e`` only uses t and x1..xn; raises ValidationError otherwise."""
    _check_vars(e, ("t",), "x", n)


def validate_family(e: Expression, n: int) -> None:
    """Check that ``e`` only uses tau, sigma and a1..an."""
    _check_vars(e, ("tau", "sigma"), "a", n)


# ---------------------------------------------------------------------------
# Printing

def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def pretty_print(e: Expression) -> str:
    """Canonical fully-parenthesized rendering; parses back to an equal tree."""
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{pretty_print(e.operand)})"
    if isinstance(e, Bin):
        return f"({pretty_print(e.left)} {e.op} {pretty_print(e.right)})"
    if isinstance(e, Call):
        return f"{e.fn}({pretty_print(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")
