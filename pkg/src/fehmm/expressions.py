"""Parser and evaluator for scalar coefficient expressions in (t, x, s, y).

Coefficients, right-hand sides and exact solutions enter through JSON config
files as plain text, e.g. ``"3 + cos(2*pi*y) + cos(2*pi*s)^2"``.  The grammar
is conventional infix arithmetic:

    expr    := term (('+'|'-') term)*
    term    := power (('*'|'/') power)*
    power   := unary ('^' power)?          # right-associative
    unary   := '-' unary | atom
    atom    := NUMBER | 'pi' | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

Variables are restricted to ``t, x, s, y``; functions to ``sin, cos, exp,
abs``.  Evaluation is plain IEEE double precision and accepts numpy arrays in
any variable slot (broadcasting applies), which the assembly code relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VARIABLES = ("t", "x", "s", "y")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}

_BINOPS = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


class ExpressionError(ValueError):
    """Base class for parse and evaluation failures."""


class ParseError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(ExpressionError):
    """Division by zero or an otherwise non-finite evaluation result."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Expr:
    """Node of the expression tree.

    ``kind`` is one of ``num``, ``var``, ``neg``, ``call`` or a binary
    operator symbol.  Nodes are immutable; evaluation is pure.
    """

    kind: str
    value: float = 0.0
    name: str = ""
    args: tuple["Expr", ...] = field(default=())

    def variables(self) -> frozenset[str]:
        if self.kind == "var":
            return frozenset((self.name,))
        out: frozenset[str] = frozenset()
        for a in self.args:
            out = out | a.variables()
        return out

    def __str__(self) -> str:
        return pretty_print(self)


def pretty_print(e: Expr) -> str:
    """Fully parenthesized rendering that re-parses to an equivalent tree."""
    if e.kind == "num":
        return repr(e.value)
    if e.kind == "var":
        return e.name
    if e.kind == "neg":
        return f"(-{pretty_print(e.args[0])})"
    if e.kind == "call":
        return f"{e.name}({pretty_print(e.args[0])})"
    return f"({pretty_print(e.args[0])} {e.kind} {pretty_print(e.args[1])})"


# ---------------------------------------------------------------------------
# Tokenizer / recursive-descent parser

_TOKEN_CHARS = set("+-*/^()")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    """Returns (type, text, offset) triples; type in {op, num, ident, end}."""
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _TOKEN_CHARS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_e = False
            while j < n and (
                source[j].isdigit()
                or source[j] == "."
                or source[j] in "eE"
                or (seen_e and source[j] in "+-" and source[j - 1] in "eE")
            ):
                if source[j] in "eE":
                    if seen_e:
                        break
                    # only part of the number when followed by digit/sign
                    if j + 1 < n and (source[j + 1].isdigit() or source[j + 1] in "+-"):
                        seen_e = True
                    else:
                        break
                j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ParseError(f"malformed number {text!r}", i)
            tokens.append(("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("ident", source[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        typ, text, off = self.peek()
        if typ != "op" or text != op:
            raise ParseError(f"expected {op!r}, found {text or 'end of input'!r}", off)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        typ, text, off = self.peek()
        if typ != "end":
            raise ParseError(f"unexpected trailing input {text!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            typ, text, _ = self.peek()
            if typ == "op" and text in "+-":
                self.advance()
                e = Expr(text, args=(e, self.term()))
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            typ, text, _ = self.peek()
            if typ == "op" and text in "*/":
                self.advance()
                e = Expr(text, args=(e, self.unary()))
            else:
                return e

    def unary(self) -> Expr:
        typ, text, _ = self.peek()
        if typ == "op" and text == "-":
            self.advance()
            return Expr("neg", args=(self.unary(),))
        return self.power()

    def power(self) -> Expr:
        # binds tighter than unary minus; the exponent may itself be signed
        e = self.atom()
        typ, text, _ = self.peek()
        if typ == "op" and text == "^":
            self.advance()
            return Expr("^", args=(e, self.unary()))
        return e

    def atom(self) -> Expr:
        typ, text, off = self.advance()
        if typ == "num":
            return Expr("num", value=float(text))
        if typ == "ident":
            if text == "pi":
                return Expr("num", value=math.pi)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Expr("call", name=text, args=(arg,))
            if text in VARIABLES:
                return Expr("var", name=text)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", off)
        if typ == "op" and text == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(
            f"expected a number, variable or '(', found {text or 'end of input'!r}", off
        )


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree.

    Raises ParseError (with byte offset) on malformed input and
    UnknownIdentifierError for identifiers outside {t,x,s,y,pi,sin,cos,exp,abs}.
    """
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Evaluation

def _eval(e: Expr, env: dict):
    if e.kind == "num":
        return e.value
    if e.kind == "var":
        return env[e.name]
    if e.kind == "neg":
        return np.negative(_eval(e.args[0], env))
    if e.kind == "call":
        return FUNCTIONS[e.name](_eval(e.args[0], env))
    return _BINOPS[e.kind](_eval(e.args[0], env), _eval(e.args[1], env))


def evaluate(e: Expr, t=0.0, x=0.0, s=0.0, y=0.0):
    """Evaluate at scalars or numpy arrays (broadcast); scalars give a float.

    Raises EvaluationError on division by zero or any non-finite result.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(e, {"t": t, "x": x, "s": s, "y": y})
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"non-finite value when evaluating {pretty_print(e)}")
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Coefficients


@dataclass(frozen=True)
class MultiscaleCoefficient:
    """A coefficient a(t, x, s, y) with declared coercivity bounds.

    ``lambda_min``/``lambda_max`` are user-declared; ``check_bounds`` verifies
    them by dense sampling.  The ``depends_on_*`` flags are derived from the
    parsed tree and drive the cell-solve caching policy.
    """

    expr: Expr
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        if not (0.0 < self.lambda_min <= self.lambda_max):
            raise ValueError(
                f"bounds must satisfy 0 < lambda_min <= lambda_max, "
                f"got [{self.lambda_min}, {self.lambda_max}]"
            )

    @property
    def depends_on_t(self) -> bool:
        return "t" in self.expr.variables()

    @property
    def depends_on_x(self) -> bool:
        return "x" in self.expr.variables()

    @property
    def depends_on_s(self) -> bool:
        return "s" in self.expr.variables()

    @property
    def depends_on_y(self) -> bool:
        return "y" in self.expr.variables()

    def __call__(self, t=0.0, x=0.0, s=0.0, y=0.0):
        return evaluate(self.expr, t=t, x=x, s=s, y=y)


@dataclass(frozen=True)
class BoundsReport:
    min_seen: float
    max_seen: float
    ok: bool


def check_bounds(
    coeff: MultiscaleCoefficient,
    n_samples_per_axis: int,
    t_range: tuple[float, float] = (0.0, 1.0),
    x_range: tuple[float, float] = (0.0, 1.0),
) -> BoundsReport:
    """Sample the coefficient on a tensor grid and test the declared bounds.

    Only axes the expression actually references are gridded; s runs over
    [0, 1] and y over the unit cell (-1/2, 1/2).  A failed check is reported,
    not raised.
    """
    if n_samples_per_axis < 2:
        raise ValueError("n_samples_per_axis must be >= 2")
    n = n_samples_per_axis
    axes = {
        "t": np.linspace(*t_range, n) if coeff.depends_on_t else np.zeros(1),
        "x": np.linspace(*x_range, n) if coeff.depends_on_x else np.zeros(1),
        "s": np.linspace(0.0, 1.0, n) if coeff.depends_on_s else np.zeros(1),
        "y": np.linspace(-0.5, 0.5, n) if coeff.depends_on_y else np.zeros(1),
    }
    tg, xg, sg, yg = np.meshgrid(axes["t"], axes["x"], axes["s"], axes["y"], indexing="ij")
    vals = evaluate(coeff.expr, t=tg, x=xg, s=sg, y=yg)
    vals = np.atleast_1d(np.asarray(vals, dtype=float))
    lo = float(vals.min())
    hi = float(vals.max())
    ok = coeff.lambda_min <= lo and hi <= coeff.lambda_max
    return BoundsReport(min_seen=lo, max_seen=hi, ok=ok)


def harmonic_mean_1d(coeff: MultiscaleCoefficient, n_quad: int) -> float:
    """( integral over Y of 1/a(y) )^-1 by composite 2-point Gauss on n_quad panels.

    Serves as an independent closed-form-style oracle for the homogenized
    coefficient of purely y-dependent coefficients in 1D.
    """
    vars_used = coeff.expr.variables()
    if not vars_used <= {"y"}:
        raise ValueError(
            f"harmonic_mean_1d requires a y-only coefficient, got variables {sorted(vars_used)}"
        )
    if n_quad < 1:
        raise ValueError("n_quad must be >= 1")
    w = 1.0 / n_quad
    left = -0.5 + w * np.arange(n_quad)
    offset = 0.5 / math.sqrt(3.0)
    yq = np.concatenate([left + (0.5 - offset) * w, left + (0.5 + offset) * w])
    vals = np.broadcast_to(np.asarray(evaluate(coeff.expr, y=yq), dtype=float), yq.shape)
    integral = float(np.sum(0.5 * w / vals))
    if integral <= 0.0:
        raise EvaluationError("coefficient is not positive on the quadrature grid")
    return 1.0 / integral
