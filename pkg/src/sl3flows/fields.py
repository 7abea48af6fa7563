"""Scalar fields on SL(3,R) with exact directional derivatives.

A field is either parsed from a small expression language over the matrix
entries ``m11 .. m33`` or assembled from other fields by arithmetic and by
directional differentiation.  The derivative of a field f along an algebra
element V at a point g is d/dt f(g exp(tV)) at t = 0; it is computed by
forward-mode dual numbers pushed through the linear map g -> gV, so the
result is exact to rounding (finite differences appear in the tests only,
as an independent oracle).

Expression grammar (entries, decimal literals, + - * / ^, calls):

    expr    :=  term  (('+' | '-') term)*
    term    :=  unary (('*' | '/') unary)*
    unary   :=  '-' unary | power
    power   :=  primary ('^' unary)?
    primary :=  NUMBER | 'pi' | ENTRY | FUNC '(' expr ')' | '(' expr ')'

with ENTRY one of m11..m33 and FUNC one of sin, cos, exp, tanh.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from . import sampling
from .duals import Dual, dcos, dexp, dsin, dtanh, value
from .lie_core import DIM, FRAME, AlgebraElement, GroupElement, Z, heisenberg_partner


class FieldSyntaxError(ValueError):
    """Parse failure with 1-based position information."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class TransferDomainError(ValueError):
    """The transfer function leaves the admissible domain (1 + Zw <= 0)."""


# ---------------------------------------------------------------------------
# tokens and syntax tree
# ---------------------------------------------------------------------------

_FUNCTIONS = {"sin": dsin, "cos": dcos, "exp": dexp, "tanh": dtanh}
_CONSTANTS = {"pi": math.pi}

_ENTRY_NAMES = {f"m{r}{c}": 3 * (r - 1) + (c - 1) for r in range(1, 4) for c in range(1, 4)}


@dataclasses.dataclass(frozen=True)
class Num:
    value: float


@dataclasses.dataclass(frozen=True)
class Entry:
    index: int  # flat row-major index 0..8

    @property
    def name(self) -> str:
        return f"m{self.index // 3 + 1}{self.index % 3 + 1}"


@dataclasses.dataclass(frozen=True)
class Neg:
    operand: object


@dataclasses.dataclass(frozen=True)
class BinOp:
    op: str
    lhs: object
    rhs: object


@dataclasses.dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclasses.dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise FieldSyntaxError(f"malformed number {text!r}", line, col)
            tokens.append(_Token("number", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("name", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if source.startswith("**", i):
            tokens.append(_Token("op", "^", line, col))
            col += 2
            i += 2
            continue
        if ch in "+-*/^(),":
            kind = {"(": "lparen", ")": "rparen", ",": "comma"}.get(ch, "op")
            tokens.append(_Token(kind, ch, line, col))
            col += 1
            i += 1
            continue
        raise FieldSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


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

    def fail(self, message: str, tok: Optional[_Token] = None):
        tok = tok or self.peek()
        raise FieldSyntaxError(message, tok.line, tok.column)

    def parse(self):
        node = self.expr()
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.primary()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            node = BinOp("^", node, self.unary())
        return node

    def primary(self):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "lparen":
            self.advance()
            node = self.expr()
            if self.peek().kind != "rparen":
                self.fail("expected ')'")
            self.advance()
            return node
        if tok.kind == "name":
            self.advance()
            name = tok.text
            if self.peek().kind == "lparen":
                if name in _ENTRY_NAMES or name in _CONSTANTS:
                    self.fail(f"{name!r} is not a function", tok)
                if name not in _FUNCTIONS:
                    self.fail(f"unknown function {name!r}", tok)
                self.advance()
                arg = self.expr()
                if self.peek().kind == "comma":
                    self.fail(f"arity mismatch: {name} takes exactly one argument")
                if self.peek().kind != "rparen":
                    self.fail("expected ')'")
                self.advance()
                return Call(name, arg)
            if name in _ENTRY_NAMES:
                return Entry(_ENTRY_NAMES[name])
            if name in _CONSTANTS:
                return Num(_CONSTANTS[name])
            if name in _FUNCTIONS:
                self.fail(f"arity mismatch: {name} takes exactly one argument", tok)
            self.fail(f"unknown identifier {name!r}", tok)
        self.fail(f"expected an expression, found {tok.text!r}" if tok.text else "unexpected end of input")


def _eval_node(node, m):
    t = type(node)
    if t is Entry:
        return m[node.index]
    if t is Num:
        return node.value
    if t is BinOp:
        lhs = _eval_node(node.lhs, m)
        rhs = _eval_node(node.rhs, m)
        op = node.op
        if op == "+":
            return lhs + rhs
        if op == "-":
            return lhs - rhs
        if op == "*":
            return lhs * rhs
        if op == "/":
            return lhs / rhs
        return lhs ** rhs
    if t is Neg:
        return -_eval_node(node.operand, m)
    return _FUNCTIONS[node.func](_eval_node(node.arg, m))


def _prec(node) -> int:
    t = type(node)
    if t is BinOp:
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[node.op]
    if t is Neg:
        return 3
    return 9


def _to_source(node) -> str:
    t = type(node)
    if t is Num:
        return repr(node.value)
    if t is Entry:
        return node.name
    if t is Call:
        return f"{node.func}({_to_source(node.arg)})"
    if t is Neg:
        inner = _to_source(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    p = _prec(node)
    lhs, rhs = _to_source(node.lhs), _to_source(node.rhs)
    if node.op == "^":
        # right-associative: parenthesize a left child of equal precedence
        if _prec(node.lhs) <= p:
            lhs = f"({lhs})"
        if _prec(node.rhs) < p:
            rhs = f"({rhs})"
    else:
        if _prec(node.lhs) < p:
            lhs = f"({lhs})"
        rhs_needs = _prec(node.rhs) <= p if node.op in ("-", "/") else _prec(node.rhs) < p
        if rhs_needs:
            rhs = f"({rhs})"
    return f"{lhs}{node.op}{rhs}"


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class ScalarField:
    """A smooth real function of a group element.

    Supports arithmetic with other fields and with numbers, and exact
    directional differentiation via :meth:`derivative`.
    """

    def _eval(self, m):
        raise NotImplementedError

    def eval_matrix(self, matrix: np.ndarray) -> float:
        return float(self._eval(tuple(matrix.ravel().tolist())))

    def __call__(self, point) -> float:
        m = point.matrix if isinstance(point, GroupElement) else np.asarray(point, dtype=float)
        return self.eval_matrix(m)

    def derivative(self, direction: AlgebraElement) -> "ScalarField":
        """The field g -> d/dt self(g exp(t direction)) at t = 0."""
        return _DerivativeField(self, direction)

    def value_and_frame_gradient(self, matrix: np.ndarray):
        """Value together with all eight frame directional derivatives at once."""
        flat = matrix.ravel().tolist()
        tang = (matrix[None, :, :] @ FRAME).reshape(DIM, 9).T  # (9, 8)
        entries = tuple(Dual(flat[k], tang[k]) for k in range(9))
        res = self._eval(entries)
        if isinstance(res, Dual):
            grad = res.b
            if not isinstance(grad, np.ndarray):
                grad = np.full(DIM, float(grad))
            return float(res.a), np.asarray(grad, dtype=float)
        return float(res), np.zeros(DIM)

    def __add__(self, other):
        return _BinaryField("+", self, as_field(other))

    def __radd__(self, other):
        return _BinaryField("+", as_field(other), self)

    def __sub__(self, other):
        return _BinaryField("-", self, as_field(other))

    def __rsub__(self, other):
        return _BinaryField("-", as_field(other), self)

    def __mul__(self, other):
        return _BinaryField("*", self, as_field(other))

    def __rmul__(self, other):
        return _BinaryField("*", as_field(other), self)

    def __truediv__(self, other):
        return _BinaryField("/", self, as_field(other))

    def __rtruediv__(self, other):
        return _BinaryField("/", as_field(other), self)

    def __neg__(self):
        return _BinaryField("*", _ConstField(-1.0), self)


class _ConstField(ScalarField):
    def __init__(self, val: float):
        self.val = float(val)

    def _eval(self, m):
        return self.val


class _BinaryField(ScalarField):
    def __init__(self, op: str, left: ScalarField, right: ScalarField):
        self.op = op
        self.left = left
        self.right = right

    def _eval(self, m):
        lhs = self.left._eval(m)
        rhs = self.right._eval(m)
        if self.op == "+":
            return lhs + rhs
        if self.op == "-":
            return lhs - rhs
        if self.op == "*":
            return lhs * rhs
        return lhs / rhs


class _DerivativeField(ScalarField):
    def __init__(self, base: ScalarField, direction: AlgebraElement):
        self.base = base
        self.direction = direction
        vm = direction.matrix
        pairs = []
        for k in range(3):
            for j in range(3):
                c = float(vm[k, j])
                if c != 0.0:
                    for i in range(3):
                        pairs.append((3 * i + j, 3 * i + k, c))
        self._pairs = tuple(pairs)

    def _eval(self, m):
        dm = [0.0] * 9
        for out, src, c in self._pairs:
            dm[out] = dm[out] + m[src] * c
        lifted = tuple(Dual(m[k], dm[k]) for k in range(9))
        res = self.base._eval(lifted)
        return res.b if isinstance(res, Dual) else 0.0


class ExpressionField(ScalarField):
    """A field defined by a parsed expression over the matrix entries."""

    def __init__(self, tree, source: str):
        self.tree = tree
        self.source = source

    def _eval(self, m):
        return _eval_node(self.tree, m)

    def pretty(self) -> str:
        """Canonical source text; reparsing it reproduces the same tree."""
        return _to_source(self.tree)

    def __repr__(self):
        return f"ExpressionField({self.pretty()!r})"


def as_field(x) -> ScalarField:
    if isinstance(x, ScalarField):
        return x
    return _ConstField(float(x))


def constant_field(x: float) -> ScalarField:
    return _ConstField(x)


def parse_field(source: str) -> ExpressionField:
    """Parse an expression over m11..m33 into a field.

    Raises FieldSyntaxError (with line/column) on malformed input, unknown
    identifiers, or wrong call arity.
    """
    return ExpressionField(_Parser(_tokenize(source)).parse(), source)


def directional_derivative(field: ScalarField, direction: AlgebraElement, point,
                           second_direction: AlgebraElement | None = None) -> float:
    """(direction field)(point); with `second_direction`, direction(second field)."""
    f = field if second_direction is None else field.derivative(second_direction)
    return f.derivative(direction)(point)


def finite_difference_derivative(field: ScalarField, direction: AlgebraElement, point,
                                 step: float = 1e-5) -> float:
    """Central-difference oracle for :func:`directional_derivative`."""
    from .lie_core import exp_map

    m = point.matrix if isinstance(point, GroupElement) else np.asarray(point, dtype=float)
    fwd = field.eval_matrix(m @ exp_map(direction, step).matrix)
    bwd = field.eval_matrix(m @ exp_map(direction, -step).matrix)
    return (fwd - bwd) / (2.0 * step)


# ---------------------------------------------------------------------------
# perturbation data and cocycles
# ---------------------------------------------------------------------------


class PerturbationData:
    """A perturbed-flow datum: scalar fields beta, lambda and the frame triple.

    `U` is the unperturbed upper-nilpotent direction, `W` its shear partner
    with [U, W] = -c Z, and `Z` the central direction.  `transfer` holds the
    generating function when the datum was built by :func:`from_transfer`.
    """

    def __init__(self, beta: ScalarField, lam: ScalarField, U: AlgebraElement,
                 W: AlgebraElement | None = None, Zdir: AlgebraElement = Z,
                 c: float | None = None, transfer: ScalarField | None = None):
        if W is None or c is None:
            W, c = heisenberg_partner(U)
        self.beta = beta
        self.lam = lam
        self.U = U
        self.W = W
        self.Z = Zdir
        self.c = float(c)
        self.transfer = transfer
        # composite fields used throughout; built once
        self.w_beta = beta.derivative(W)
        self.z_beta = beta.derivative(Zdir)
        self.invariance_field = lam.derivative(U) + (beta * lam).derivative(Zdir)
        self.shear_integrand = lam * (self.c + self.w_beta)
        self.ztilde = 1.0 / lam  # time-change factor of the commuting central flow


def from_transfer(w: ScalarField, U: AlgebraElement, W: AlgebraElement | None = None,
                  Zdir: AlgebraElement = Z, c: float | None = None,
                  samples=None) -> PerturbationData:
    """Build the smoothly trivial perturbation generated by a transfer function.

    Sets beta = -Uw / (1 + Zw) and lambda = 1 + Zw.  The sampled condition
    Zw > -1 is checked on `samples` (default: the standard sample set);
    violation raises TransferDomainError.
    """
    if W is None or c is None:
        W, c = heisenberg_partner(U)
    zw = w.derivative(Zdir)
    uw = w.derivative(U)
    pts = sampling.default_samples() if samples is None else samples
    lam_vals = [1.0 + zw(g) for g in pts]
    worst = min(lam_vals) if lam_vals else 1.0
    if worst <= 0.0:
        raise TransferDomainError(
            f"1 + Zw reaches {worst:.3e} on the sample set; transfer function out of range"
        )
    lam = 1.0 + zw
    beta = (-1.0 * uw) / lam
    return PerturbationData(beta, lam, U, W, Zdir, c, transfer=w)


def invariance_residual(P: PerturbationData, g) -> float:
    """U(lambda) + Z(beta*lambda) at g; vanishes iff the flow of U + beta Z
    preserves the measure with density lambda."""
    return P.invariance_field(g)


@dataclasses.dataclass(frozen=True)
class CocyclePair:
    """A pair (f, g) with Uf + Zg = 0; the mean of the second component is
    normalized away by an explicit constant."""

    f: ScalarField
    g: ScalarField
    mean_constant: float
    U: AlgebraElement
    Z: AlgebraElement


def cocycle_from_perturbation(P: PerturbationData, mean_constant: float = 0.0) -> CocyclePair:
    """The pair (lambda - 1, lambda*beta - mean_constant)."""
    return CocyclePair(P.lam - 1.0, P.lam * P.beta - mean_constant, mean_constant, P.U, P.Z)


def cocycle_residual(pair: CocyclePair, point) -> float:
    """U f + Z g at the point; zero for pairs coming from invariant measures."""
    res = pair.f.derivative(pair.U) + pair.g.derivative(pair.Z)
    return res(point)


@dataclasses.dataclass(frozen=True)
class ConditionReport:
    """Sampled sup-norm check of the shear-dominance condition |W beta| < |c|."""

    c: float
    max_w_beta: float
    lam_min: float
    lam_max: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return self.max_w_beta < abs(self.c) and self.lam_min > 0.0

    def as_dict(self) -> dict:
        return {
            "c": self.c,
            "max_w_beta": self.max_w_beta,
            "lam_min": self.lam_min,
            "lam_max": self.lam_max,
            "n_samples": self.n_samples,
            "passed": self.passed,
        }


def condition_check(P: PerturbationData, samples) -> ConditionReport:
    """Evaluate |W beta| and lambda over the samples and compare against |c|."""
    samples = list(samples)
    wb = max((abs(P.w_beta(g)) for g in samples), default=0.0)
    lam_vals = [P.lam(g) for g in samples]
    return ConditionReport(
        c=P.c,
        max_w_beta=wb,
        lam_min=min(lam_vals, default=1.0),
        lam_max=max(lam_vals, default=1.0),
        n_samples=len(samples),
    )
