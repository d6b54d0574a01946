"""Guard and action language for state-machine transitions.

A guard is a single comparison of two arithmetic expressions::

    guard   := arith relop arith
    action  := IDENT ":=" arith
    arith   := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | atom
    atom    := NUMBER | IDENT | "(" arith ")"
    relop   := "<" | "<=" | ">" | ">=" | "==" | "!="

Integer arithmetic is exact; integer division truncates toward zero.
Any real operand promotes the subtree to 64-bit floats.  Comparisons are
exact on the represented values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Set, Tuple, Union

Number = Union[int, float]
Env = Dict[str, Number]

RELOPS = ("<", "<=", ">", ">=", "==", "!=")
INTEGER = "integer"
REAL = "real"


class GuardSyntaxError(ValueError):
    """Raised for malformed guard or action text.  ``offset`` is 0-based."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        self.reason = message
        super().__init__(f"{message} at offset {offset}")


class UnknownOperatorError(GuardSyntaxError):
    pass


class TrailingInputError(GuardSyntaxError):
    pass


class EvaluationError(ArithmeticError):
    """Raised when an expression cannot be evaluated under an environment."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        self.reason = message
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"{message}{where}")


# --- AST -------------------------------------------------------------------
# Source positions are carried for diagnostics only and never take part
# in equality, so a reparsed pretty-print compares equal to the original.


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class RealLit:
    value: float
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "ArithExpr"
    right: "ArithExpr"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "ArithExpr"
    pos: int = field(default=-1, compare=False, repr=False)


ArithExpr = Union[Var, IntLit, RealLit, BinOp, Neg]


@dataclass(frozen=True)
class GuardExpr:
    op: str
    lhs: ArithExpr
    rhs: ArithExpr

    def __str__(self) -> str:
        return format_guard(self)


@dataclass(frozen=True)
class ActionStmt:
    target: str
    expr: ArithExpr

    def __str__(self) -> str:
        return format_action(self)


def Add(a: ArithExpr, b: ArithExpr) -> BinOp:
    return BinOp("+", a, b)


def Sub(a: ArithExpr, b: ArithExpr) -> BinOp:
    return BinOp("-", a, b)


def Mul(a: ArithExpr, b: ArithExpr) -> BinOp:
    return BinOp("*", a, b)


def Div(a: ArithExpr, b: ArithExpr) -> BinOp:
    return BinOp("/", a, b)


# --- lexer -----------------------------------------------------------------

_NUMBER = re.compile(r"(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPCHARS = "<>=!&|:"
_VALID_OPS = {"<", "<=", ">", ">=", "==", "!=", ":="}


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, IDENT, OP, EOF
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _NUMBER.match(text, i)
            tokens.append(Token("NUM", m.group(0), i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(Token("IDENT", m.group(0), i))
            i = m.end()
            continue
        if ch in "+-*/()":
            tokens.append(Token("OP", ch, i))
            i += 1
            continue
        if ch in _OPCHARS:
            j = i
            while j < n and text[j] in _OPCHARS:
                j += 1
            run = text[i:j]
            if run not in _VALID_OPS:
                raise UnknownOperatorError(f"unknown operator {run!r}", i, text)
            tokens.append(Token("OP", run, i))
            i = j
            continue
        raise UnknownOperatorError(f"unexpected character {ch!r}", i, text)
    tokens.append(Token("EOF", "", n))
    return tokens


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str) -> GuardSyntaxError:
        tok = self.tok
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        return GuardSyntaxError(f"{message}, found {found}", tok.pos, self.text)

    def expect_end(self) -> None:
        if self.tok.kind != "EOF":
            tok = self.tok
            raise TrailingInputError(
                f"unexpected trailing input {tok.text!r}", tok.pos, self.text
            )

    def guard(self) -> GuardExpr:
        lhs = self.arith()
        tok = self.tok
        if tok.kind != "OP" or tok.text not in RELOPS:
            raise self.error("expected relational operator")
        self.advance()
        rhs = self.arith()
        if self.tok.kind == "OP" and self.tok.text in RELOPS:
            t = self.tok
            raise TrailingInputError(
                "a guard holds exactly one relational operator", t.pos, self.text
            )
        self.expect_end()
        return GuardExpr(tok.text, lhs, rhs)

    def action(self) -> ActionStmt:
        tok = self.tok
        if tok.kind != "IDENT":
            raise self.error("expected assignment target")
        self.advance()
        if not (self.tok.kind == "OP" and self.tok.text == ":="):
            raise self.error("expected ':='")
        self.advance()
        expr = self.arith()
        self.expect_end()
        return ActionStmt(tok.text, expr)

    def arith(self) -> ArithExpr:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance()
            node = BinOp(op.text, node, self.term(), op.pos)
        return node

    def term(self) -> ArithExpr:
        node = self.unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op = self.advance()
            node = BinOp(op.text, node, self.unary(), op.pos)
        return node

    def unary(self) -> ArithExpr:
        if self.tok.kind == "OP" and self.tok.text == "-":
            op = self.advance()
            return Neg(self.unary(), op.pos)
        return self.atom()

    def atom(self) -> ArithExpr:
        tok = self.tok
        if tok.kind == "NUM":
            self.advance()
            if any(c in tok.text for c in ".eE"):
                return RealLit(float(tok.text), tok.pos)
            return IntLit(int(tok.text), tok.pos)
        if tok.kind == "IDENT":
            self.advance()
            return Var(tok.text, tok.pos)
        if tok.kind == "OP" and tok.text == "(":
            self.advance()
            node = self.arith()
            if not (self.tok.kind == "OP" and self.tok.text == ")"):
                raise self.error("expected ')'")
            self.advance()
            return node
        raise self.error("expected expression")


def parse_guard(text: str) -> GuardExpr:
    if not text.strip():
        raise GuardSyntaxError("empty guard", 0, text)
    return _Parser(text).guard()


def parse_action(text: str) -> ActionStmt:
    if not text.strip():
        raise GuardSyntaxError("empty action", 0, text)
    return _Parser(text).action()


def parse_arith(text: str) -> ArithExpr:
    p = _Parser(text)
    node = p.arith()
    p.expect_end()
    return node


# --- pretty printing -------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt(node: ArithExpr, ctx: int) -> str:
    if isinstance(node, Var):
        return node.name
    if isinstance(node, IntLit):
        s = str(node.value)
        return f"({s})" if node.value < 0 else s
    if isinstance(node, RealLit):
        s = repr(node.value)
        return f"({s})" if node.value < 0 or s.startswith("-") else s
    if isinstance(node, Neg):
        s = "-" + _fmt(node.operand, 3)
        return f"({s})" if ctx > 3 else s
    prec = _PREC[node.op]
    # left-associative: the right operand needs parens at equal precedence
    s = f"{_fmt(node.left, prec)} {node.op} {_fmt(node.right, prec + 1)}"
    return f"({s})" if prec < ctx else s


def format_arith(node: ArithExpr) -> str:
    return _fmt(node, 0)


def format_guard(guard: GuardExpr) -> str:
    return f"{format_arith(guard.lhs)} {guard.op} {format_arith(guard.rhs)}"


def format_action(action: ActionStmt) -> str:
    return f"{action.target} := {format_arith(action.expr)}"


# --- analysis --------------------------------------------------------------


def iter_vars(node: ArithExpr) -> Iterator[Var]:
    if isinstance(node, Var):
        yield node
    elif isinstance(node, BinOp):
        yield from iter_vars(node.left)
        yield from iter_vars(node.right)
    elif isinstance(node, Neg):
        yield from iter_vars(node.operand)


def variables(node: Union[ArithExpr, GuardExpr, ActionStmt]) -> Set[str]:
    """Names of all variables referenced by ``node``."""
    if isinstance(node, GuardExpr):
        return variables(node.lhs) | variables(node.rhs)
    if isinstance(node, ActionStmt):
        return {node.target} | variables(node.expr)
    return {v.name for v in iter_vars(node)}


def infer_kind(node: ArithExpr, kinds: Mapping[str, str]) -> str:
    """Static type of an expression given variable kinds.

    Raises KeyError for an undeclared variable.
    """
    if isinstance(node, Var):
        return kinds[node.name]
    if isinstance(node, IntLit):
        return INTEGER
    if isinstance(node, RealLit):
        return REAL
    if isinstance(node, Neg):
        return infer_kind(node.operand, kinds)
    left = infer_kind(node.left, kinds)
    right = infer_kind(node.right, kinds)
    return INTEGER if left == right == INTEGER else REAL


# --- evaluation ------------------------------------------------------------


def _int_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def eval_arith(expr: ArithExpr, env: Mapping[str, Number]) -> Number:
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {expr.name!r}", expr.pos) from None
    if isinstance(expr, (IntLit, RealLit)):
        return expr.value
    if isinstance(expr, Neg):
        return -eval_arith(expr.operand, env)
    a = eval_arith(expr.left, env)
    b = eval_arith(expr.right, env)
    op = expr.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    else:
        if b == 0:
            raise EvaluationError("division by zero", expr.pos)
        if isinstance(a, int) and isinstance(b, int):
            return _int_div(a, b)
        r = float(a) / float(b)
    if isinstance(r, float) and not math.isfinite(r):
        raise EvaluationError("non-finite result", expr.pos)
    return r


def compare(op: str, a: Number, b: Number) -> bool:
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    raise ValueError(f"unknown relational operator {op!r}")


def eval_sides(guard: GuardExpr, env: Mapping[str, Number]) -> Tuple[Number, Number]:
    return eval_arith(guard.lhs, env), eval_arith(guard.rhs, env)


def eval_guard(guard: GuardExpr, env: Mapping[str, Number]) -> bool:
    a, b = eval_sides(guard, env)
    return compare(guard.op, a, b)


def apply_action(action: ActionStmt, env: Env, kind: Optional[str] = None) -> None:
    """Execute ``action`` in place.  Integer targets keep integer values."""
    value = eval_arith(action.expr, env)
    if kind == INTEGER and isinstance(value, float):
        raise EvaluationError(f"real value assigned to integer {action.target!r}")
    if kind == REAL:
        value = float(value)
    env[action.target] = value
