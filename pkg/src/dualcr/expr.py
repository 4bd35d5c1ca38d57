"""Expression mini-language for test functions u and defining functions rho.

Grammar (precedence low to high): additive, multiplicative, unary minus,
integer power ``^``, atoms. Atoms are ``z<k>`` / ``w<k>`` symbols, ``conj(e)``,
the imaginary unit ``i``, decimal literals and parenthesized expressions.
Whitespace is insignificant.

Expressions evaluate either to complex numbers (given point values for the
symbols) or to jets (given jets for the symbols, e.g. from a surface chart).
``w`` symbols always denote the dual-map components; they are resolved through
the chart rather than treated as free variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DivisionBySingularJet,
    ExprEvalError,
    IndexOutOfRange,
    ParseError,
)
from .jets import Jet

# -- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: complex


@dataclass(frozen=True)
class Sym:
    kind: str  # "z" or "w"
    index: int  # 1-based


@dataclass(frozen=True)
class Conj:
    arg: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Union[Lit, Sym, Conj, Neg, Add, Sub, Mul, Div, Pow]

# -- tokenizer ----------------------------------------------------------------

_NUM_RE = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_SYM_RE = re.compile(r"([zw])([0-9]+)\Z")
_OPS = set("+-*/^()")


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch in _OPS:
            tokens.append((ch, ch, pos))
            pos += 1
            continue
        m = _NUM_RE.match(text, pos)
        if m:
            tokens.append(("num", m.group(), pos))
            pos = m.end()
            continue
        m = _NAME_RE.match(text, pos)
        if m:
            tokens.append(("name", m.group(), pos))
            pos = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", pos,
                         expected=("number", "symbol", "operator"))
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, n_ambient):
        self.tokens = tokens
        self.pos = 0
        self.n = n_ambient

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2],
                             expected=(kind,))
        return self.take()

    def parse(self):
        e = self.additive()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"trailing input {tok[1]!r}", tok[2],
                             expected=("end of input",))
        return e

    def additive(self):
        e = self.multiplicative()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.multiplicative()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def multiplicative(self):
        e = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            tok = self.expect("num")
            if not tok[1].isdigit():
                raise ParseError("exponent must be a nonnegative integer",
                                 tok[2], expected=("integer",))
            return Pow(base, int(tok[1]))
        return base

    def atom(self):
        tok = self.peek()
        kind, text, off = tok
        if kind == "num":
            self.take()
            return Lit(complex(float(text)))
        if kind == "(":
            self.take()
            e = self.additive()
            self.expect(")")
            return e
        if kind == "name":
            self.take()
            if text == "i":
                return Lit(1j)
            if text == "conj":
                self.expect("(")
                e = self.additive()
                self.expect(")")
                return Conj(e)
            m = _SYM_RE.match(text)
            if m:
                idx = int(m.group(2))
                if idx < 1 or (self.n is not None and idx > self.n):
                    raise IndexOutOfRange(
                        f"symbol {text!r} out of range for n={self.n} "
                        f"(offset {off})"
                    )
                return Sym(m.group(1), idx)
            raise ParseError(f"unknown symbol {text!r}", off,
                             expected=("z<k>", "w<k>", "conj", "i"))
        raise ParseError(f"expected a value, found {text!r}", off,
                         expected=("number", "symbol", "(", "-"))


def parse(text: str, n: int | None = None) -> Expr:
    """Parse an expression; if n is given, validate symbol indices <= n."""
    return _Parser(_tokenize(text), n).parse()


# -- pretty printer -------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_lit(v: complex) -> str:
    if v == 1j:
        return "i"
    if v.imag == 0.0:
        r = v.real
        return _fmt_real(r) if r >= 0 else f"-{_fmt_real(-r)}"
    re_s = _fmt_real(v.real)
    im_abs = _fmt_real(abs(v.imag))
    sign = "+" if v.imag >= 0 else "-"
    return f"({re_s} {sign} {im_abs}*i)"


def pretty(e: Expr) -> str:
    return _pretty(e, 0)


def _pretty(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Lit):
        s = _fmt_lit(e.value)
        prec = 3 if s.startswith("-") else 5
    elif isinstance(e, Sym):
        s, prec = f"{e.kind}{e.index}", 5
    elif isinstance(e, Conj):
        s, prec = f"conj({_pretty(e.arg, 0)})", 5
    elif isinstance(e, Neg):
        s, prec = f"-{_pretty(e.arg, 3)}", 3
    elif isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        s = f"{_pretty(e.left, 1)}{op}{_pretty(e.right, 2)}"
        prec = 1
    elif isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        s = f"{_pretty(e.left, 2)}{op}{_pretty(e.right, 3)}"
        prec = 2
    elif isinstance(e, Pow):
        s, prec = f"{_pretty(e.base, 5)}^{e.exponent}", 4
    else:
        raise TypeError(f"not an expression node: {e!r}")
    return f"({s})" if prec < parent_prec else s


# -- structural helpers ----------------------------------------------------------


def _walk(e):
    yield e
    for attr in ("arg", "left", "right", "base"):
        child = getattr(e, attr, None)
        if child is not None:
            yield from _walk(child)


def max_symbol_index(e: Expr, kind: str | None = None) -> int:
    """Largest 1-based symbol index used (0 if no symbols of that kind)."""
    best = 0
    for node in _walk(e):
        if isinstance(node, Sym) and (kind is None or node.kind == kind):
            best = max(best, node.index)
    return best


def uses_w(e: Expr) -> bool:
    return any(isinstance(node, Sym) and node.kind == "w" for node in _walk(e))


def substitute(e: Expr, z_map=None, w_map=None) -> Expr:
    """Replace z_k / w_k symbols by expressions (lists indexed by k-1)."""
    if isinstance(e, Lit):
        return e
    if isinstance(e, Sym):
        table = z_map if e.kind == "z" else w_map
        return table[e.index - 1] if table is not None else e
    if isinstance(e, Conj):
        return Conj(substitute(e.arg, z_map, w_map))
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, z_map, w_map))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, z_map, w_map), e.exponent)
    cls = type(e)
    return cls(substitute(e.left, z_map, w_map), substitute(e.right, z_map, w_map))


def linear_combination(coeffs, kind: str) -> Expr:
    """Expression sum_k coeffs[k] * <kind>(k+1), dropping exact zeros."""
    terms = []
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        terms.append(Sym(kind, k + 1) if c == 1 else Mul(Lit(complex(c)), Sym(kind, k + 1)))
    if not terms:
        return Lit(0j)
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


# -- evaluation -------------------------------------------------------------------


def eval_value(e: Expr, z, w=None) -> complex:
    """Evaluate at a point; z and w are sequences of complex numbers."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Sym):
        table = z if e.kind == "z" else w
        if table is None:
            raise ExprEvalError("w symbols need dual-map values")
        if e.index > len(table):
            raise IndexOutOfRange(f"{e.kind}{e.index} exceeds dimension {len(table)}")
        return complex(table[e.index - 1])
    if isinstance(e, Conj):
        return np.conj(eval_value(e.arg, z, w))
    if isinstance(e, Neg):
        return -eval_value(e.arg, z, w)
    if isinstance(e, Add):
        return eval_value(e.left, z, w) + eval_value(e.right, z, w)
    if isinstance(e, Sub):
        return eval_value(e.left, z, w) - eval_value(e.right, z, w)
    if isinstance(e, Mul):
        return eval_value(e.left, z, w) * eval_value(e.right, z, w)
    if isinstance(e, Div):
        d = eval_value(e.right, z, w)
        if abs(d) < 1e-14:
            raise DivisionBySingularJet("division by (near) zero value")
        return eval_value(e.left, z, w) / d
    if isinstance(e, Pow):
        return eval_value(e.base, z, w) ** e.exponent
    raise TypeError(f"not an expression node: {e!r}")


# Denominators whose value at the base point is smaller than this are treated
# as poles (user error: u must be smooth on S).
DENOMINATOR_FLOOR = 1e-8


def eval_jet(e: Expr, env) -> Jet:
    """Evaluate on the jets of a chart-like environment.

    `env` needs attributes ``z_jets`` (list of jets) and ``w_jets`` (list of
    jets or None). The constant term of the result is the value of the
    expression at the base point.
    """
    z_jets = env.z_jets
    w_jets = getattr(env, "w_jets", None)

    def rec(node):
        if isinstance(node, Lit):
            return Jet.constant(z_jets[0].space, node.value)
        if isinstance(node, Sym):
            table = z_jets if node.kind == "z" else w_jets
            if table is None:
                raise ExprEvalError(
                    "w symbols are only defined on charts carrying dual-map jets"
                )
            if node.index > len(table):
                raise IndexOutOfRange(
                    f"{node.kind}{node.index} exceeds dimension {len(table)}"
                )
            return table[node.index - 1]
        if isinstance(node, Conj):
            return rec(node.arg).conj()
        if isinstance(node, Neg):
            return -rec(node.arg)
        if isinstance(node, Add):
            return rec(node.left) + rec(node.right)
        if isinstance(node, Sub):
            return rec(node.left) - rec(node.right)
        if isinstance(node, Mul):
            return rec(node.left) * rec(node.right)
        if isinstance(node, Div):
            den = rec(node.right)
            if abs(den.value) < DENOMINATOR_FLOOR:
                raise DivisionBySingularJet(
                    f"denominator magnitude {abs(den.value):.3e} at base point"
                )
            return rec(node.left) / den
        if isinstance(node, Pow):
            return rec(node.base) ** node.exponent
        raise TypeError(f"not an expression node: {node!r}")

    return rec(e)


# -- Wirtinger derivatives ----------------------------------------------------

_ZERO = Lit(0j)
_ONE = Lit(1 + 0j)


def _is_zero(e):
    return isinstance(e, Lit) and e.value == 0


def _mk_add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _mk_sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Neg(b)
    return Sub(a, b)


def _mk_mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if isinstance(a, Lit) and a.value == 1:
        return b
    if isinstance(b, Lit) and b.value == 1:
        return a
    return Mul(a, b)


def wirtinger(e: Expr, j: int, bar: bool) -> Expr:
    """d/dz_j (bar=False) or d/dzbar_j (bar=True) of an expression in z only."""
    if isinstance(e, Lit):
        return _ZERO
    if isinstance(e, Sym):
        if e.kind != "z":
            raise ExprEvalError("Wirtinger derivative defined for z-expressions only")
        return _ONE if (e.index == j and not bar) else _ZERO
    if isinstance(e, Conj):
        return Conj(wirtinger(e.arg, j, not bar))
    if isinstance(e, Neg):
        d = wirtinger(e.arg, j, bar)
        return _ZERO if _is_zero(d) else Neg(d)
    if isinstance(e, Add):
        return _mk_add(wirtinger(e.left, j, bar), wirtinger(e.right, j, bar))
    if isinstance(e, Sub):
        return _mk_sub(wirtinger(e.left, j, bar), wirtinger(e.right, j, bar))
    if isinstance(e, Mul):
        return _mk_add(
            _mk_mul(wirtinger(e.left, j, bar), e.right),
            _mk_mul(e.left, wirtinger(e.right, j, bar)),
        )
    if isinstance(e, Div):
        num = _mk_sub(
            _mk_mul(wirtinger(e.left, j, bar), e.right),
            _mk_mul(e.left, wirtinger(e.right, j, bar)),
        )
        if _is_zero(num):
            return _ZERO
        return Div(num, Pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return _ZERO
        d = wirtinger(e.base, j, bar)
        if _is_zero(d):
            return _ZERO
        inner = e.base if e.exponent == 1 else Pow(e.base, e.exponent - 1)
        return _mk_mul(Lit(complex(e.exponent)), _mk_mul(inner, d))
    raise TypeError(f"not an expression node: {e!r}")


def is_real_valued(e: Expr, n: int, seed: int = 0, trials: int = 20,
                   tol: float = 1e-10) -> bool:
    """Numerical reality check: e - conj(e) vanishes at random points."""
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = eval_value(e, z)
        if abs(v - np.conj(v)) > tol * (1.0 + abs(v)):
            return False
    return True
