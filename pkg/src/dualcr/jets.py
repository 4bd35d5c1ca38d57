"""Truncated multivariate Taylor jets with complex coefficients.

A jet stores, for a smooth function of ``num_vars`` real variables, every
Taylor coefficient at the expansion point up to total degree ``order``.
Arithmetic is exact on polynomials of total degree <= order, so nested
derivative computations built on jets carry no finite-difference error.
Coefficients are complex while the variables themselves are real, which makes
complex conjugation a plain coefficient-wise operation.

Storage is dense over the graded-lexicographic monomial list; spaces are
small (num_vars <= 12, order ~ 5) so dense wins on simplicity and speed.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DivisionBySingularJet, MismatchedJetSpaces, SingularPivot

# Relative tolerance (against the largest coefficient magnitude) below which a
# divisor constant term or implicit-solve pivot counts as singular.
SINGULAR_REL_TOL = 1e-10


def _compositions(total, parts):
    """All length-`parts` tuples of nonnegative ints summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class JetSpace:
    """Monomial bookkeeping for jets in `num_vars` variables at `order`.

    Instances are canonical (see :func:`get_space`); jets compare their space
    by identity. The multiplication table and differentiation maps are built
    lazily and cached for the lifetime of the space.
    """

    def __init__(self, num_vars: int, order: int):
        if num_vars < 0 or order < 0:
            raise ValueError("num_vars and order must be nonnegative")
        self.num_vars = num_vars
        self.order = order
        mons = []
        for d in range(order + 1):
            mons.extend(_compositions(d, num_vars))
        self.monomials = np.array(mons, dtype=np.int64).reshape(len(mons), num_vars)
        self.size = len(mons)
        self.index = {m: i for i, m in enumerate(mons)}
        self.degrees = self.monomials.sum(axis=1)
        self._mul_table = None
        self._partial_data = [None] * num_vars
        self._subst_data = [None] * num_vars
        self._factorials = None

    def var_index(self, v: int) -> int:
        """Coefficient index of the degree-one monomial t_v."""
        return self.index[tuple(1 if u == v else 0 for u in range(self.num_vars))]

    def mul_table(self):
        if self._mul_table is None:
            by_deg = [np.nonzero(self.degrees == d)[0] for d in range(self.order + 1)]
            ia, ib, it = [], [], []
            index = self.index
            mons = self.monomials
            for da in range(self.order + 1):
                for db in range(self.order + 1 - da):
                    for i in by_deg[da]:
                        mi = mons[i]
                        for j in by_deg[db]:
                            ia.append(i)
                            ib.append(j)
                            it.append(index[tuple(mi + mons[j])])
            self._mul_table = (
                np.array(ia, dtype=np.intp),
                np.array(ib, dtype=np.intp),
                np.array(it, dtype=np.intp),
            )
        return self._mul_table

    def partial_data(self, v: int):
        if self._partial_data[v] is None:
            src, dst, fac = [], [], []
            for i, mon in enumerate(self.monomials):
                if mon[v] > 0:
                    t = list(mon)
                    t[v] -= 1
                    src.append(i)
                    dst.append(self.index[tuple(t)])
                    fac.append(mon[v])
            self._partial_data[v] = (
                np.array(src, dtype=np.intp),
                np.array(dst, dtype=np.intp),
                np.array(fac, dtype=np.float64),
            )
        return self._partial_data[v]

    def subst_data(self, v: int):
        """Grouping of coefficients by the exponent of variable v.

        Used to rewrite a jet as a polynomial in t_v whose coefficients are
        jets in the remaining variables.
        """
        if self._subst_data[v] is None:
            red = get_space(self.num_vars - 1, self.order)
            groups = [([], []) for _ in range(self.order + 1)]
            for i, mon in enumerate(self.monomials):
                d = mon[v]
                rest = tuple(mon[u] for u in range(self.num_vars) if u != v)
                groups[d][0].append(i)
                groups[d][1].append(red.index[rest])
            self._subst_data[v] = [
                (np.array(s, dtype=np.intp), np.array(t, dtype=np.intp))
                for s, t in groups
            ]
        return self._subst_data[v]

    def factorials(self):
        """alpha! for every stored multi-index (derivative = coeff * alpha!)."""
        if self._factorials is None:
            f = np.ones(self.size)
            for i, mon in enumerate(self.monomials):
                for e in mon:
                    f[i] *= math.factorial(int(e))
            self._factorials = f
        return self._factorials


@lru_cache(maxsize=None)
def get_space(num_vars: int, order: int) -> JetSpace:
    return JetSpace(num_vars, order)


class Jet:
    """A truncated Taylor expansion; immutable by convention."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = np.asarray(coeffs, dtype=np.complex128)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def constant(space: JetSpace, value) -> "Jet":
        c = np.zeros(space.size, dtype=np.complex128)
        c[0] = value
        return Jet(space, c)

    @staticmethod
    def variable(space: JetSpace, v: int, base=0.0) -> "Jet":
        c = np.zeros(space.size, dtype=np.complex128)
        c[0] = base
        c[space.var_index(v)] = 1.0
        return Jet(space, c)

    @staticmethod
    def zero(space: JetSpace) -> "Jet":
        return Jet(space, np.zeros(space.size, dtype=np.complex128))

    @staticmethod
    def from_terms(space: JetSpace, terms: dict) -> "Jet":
        """Build from {multi-index tuple: coefficient}."""
        c = np.zeros(space.size, dtype=np.complex128)
        for mon, val in terms.items():
            c[space.index[tuple(mon)]] = val
        return Jet(space, c)

    # -- basic queries --------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return self.space.num_vars

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> complex:
        """Value at the base point (coefficient of the zero multi-index)."""
        return complex(self.coeffs[0])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def coeff(self, mon) -> complex:
        return complex(self.coeffs[self.space.index[tuple(mon)]])

    def __repr__(self):
        return f"Jet(m={self.num_vars}, K={self.order}, |c|max={self.max_abs():.3g})"

    # -- arithmetic ------------------------------------------------------------

    def _check(self, other: "Jet"):
        if other.space is not self.space and (
            other.num_vars != self.num_vars or other.order != self.order
        ):
            raise MismatchedJetSpaces(
                f"jet spaces differ: ({self.num_vars},{self.order}) vs "
                f"({other.num_vars},{other.order})"
            )

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.space, self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += other
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.space, self.coeffs - other.coeffs)
        c = self.coeffs.copy()
        c[0] -= other
        return Jet(self.space, c)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] += other
        return Jet(self.space, c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.coeffs * other)
        self._check(other)
        a, b = self.coeffs, other.coeffs
        # constant-operand fast paths (common in linear solves with sparse RHS)
        if not a[1:].any():
            return Jet(self.space, a[0] * b)
        if not b[1:].any():
            return Jet(self.space, b[0] * a)
        ia, ib, it = self.space.mul_table()
        prod = a[ia] * b[ib]
        re = np.bincount(it, weights=prod.real, minlength=self.space.size)
        im = np.bincount(it, weights=prod.imag, minlength=self.space.size)
        return Jet(self.space, re + 1j * im)

    __rmul__ = __mul__

    def inverse(self) -> "Jet":
        """Multiplicative inverse, exact to the truncation order."""
        c = self.coeffs
        m = float(np.max(np.abs(c))) if c.size else 0.0
        c0 = c[0]
        if m == 0.0 or abs(c0) < SINGULAR_REL_TOL * m:
            raise DivisionBySingularJet(
                f"constant term {abs(c0):.3e} below tolerance (max coeff {m:.3e})"
            )
        # 1/b = (1/c0) * sum_k q^k with q = 1 - b/c0 (no constant term)
        qc = -(c / c0)
        qc[0] += 1.0
        q = Jet(self.space, qc)
        s = Jet.constant(self.space, 1.0)
        for _ in range(self.order):
            s = (q * s) + 1.0
        return s * (1.0 / c0)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self * other.inverse()
        return Jet(self.space, self.coeffs / other)

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("jet powers must be nonnegative integers")
        result = Jet.constant(self.space, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def conj(self) -> "Jet":
        """Complex conjugate; variables are real so only coefficients flip."""
        return Jet(self.space, self.coeffs.conj())

    def partial(self, v: int) -> "Jet":
        """d/dt_v, exact to degree order-1 (top-degree coefficients vanish)."""
        if not 0 <= v < self.num_vars:
            raise IndexError(f"variable index {v} out of range")
        src, dst, fac = self.space.partial_data(v)
        out = np.zeros(self.space.size, dtype=np.complex128)
        out[dst] = self.coeffs[src] * fac
        return Jet(self.space, out)

    def trunc(self, order: int) -> "Jet":
        """Re-truncate (or zero-pad) to a different order."""
        if order == self.order:
            return self
        tgt = get_space(self.num_vars, order)
        if order < self.order:
            return Jet(tgt, self.coeffs[: tgt.size].copy())
        out = np.zeros(tgt.size, dtype=np.complex128)
        out[: self.space.size] = self.coeffs
        return Jet(tgt, out)

    def eval_at(self, t) -> complex:
        """Evaluate the truncated polynomial at a real displacement t."""
        t = np.asarray(t, dtype=float)
        powers = np.prod(t[None, :] ** self.space.monomials, axis=1)
        return complex(np.sum(self.coeffs * powers))

    def derivative_magnitudes(self) -> np.ndarray:
        """|d^alpha f| for every stored alpha (coefficient times alpha!)."""
        return np.abs(self.coeffs) * self.space.factorials()


# -- spec-level operation wrappers --------------------------------------------

def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    """Dispatch add/sub/mul/div on two jets of the same space."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def jet_partial(a: Jet, var_index: int) -> Jet:
    return a.partial(var_index)


def subst_var(a: Jet, v: int, g: Jet) -> Jet:
    """Substitute jet g (in the remaining variables) for variable v of a.

    Rewrites a as sum_d r_d * t_v^d and evaluates by Horner in g. Exact to the
    common truncation order.
    """
    red = get_space(a.num_vars - 1, a.order)
    if g.space is not red:
        raise MismatchedJetSpaces("substituted jet lives in the wrong space")
    groups = a.space.subst_data(v)
    r = []
    for src, dst in groups:
        c = np.zeros(red.size, dtype=np.complex128)
        c[dst] = a.coeffs[src]
        r.append(Jet(red, c))
    res = r[a.order]
    for d in range(a.order - 1, -1, -1):
        res = res * g + r[d]
    return res


def implicit_solve(rho: Jet, pivot_var: int) -> Jet:
    """Solve rho(t, s) = 0 for s = g(t) as a jet, by Newton iteration.

    Requires rho to vanish at the base point and to have a nonzero linear
    coefficient in the pivot variable. The result has no constant term and
    satisfies rho(t, g(t)) = 0 to the full truncation order.
    """
    m = rho.max_abs()
    if m == 0.0:
        raise SingularPivot("rho is identically zero")
    if abs(rho.value) > 1e-8 * (1.0 + m):
        raise SingularPivot("rho does not vanish at the base point")
    lin = rho.coeffs[rho.space.var_index(pivot_var)]
    if abs(lin) < SINGULAR_REL_TOL * m:
        raise SingularPivot(
            f"linear pivot coefficient {abs(lin):.3e} below tolerance"
        )
    red = get_space(rho.num_vars - 1, rho.order)
    g = Jet.zero(red)
    drho = rho.partial(pivot_var)
    # error valuation doubles per step; 2^iters must exceed the order
    iters = max(1, math.ceil(math.log2(rho.order + 1)))
    for _ in range(iters):
        f = subst_var(rho, pivot_var, g)
        df = subst_var(drho, pivot_var, g)
        g = g - f / df
    return g


def jet_linear_solve(rows, rhs_columns):
    """Solve A x = b over the jet ring for several right-hand sides.

    `rows` is an N x N nested list of jets, `rhs_columns` an N x R nested
    list. Gaussian elimination with partial pivoting on constant-term
    magnitude; a jet matrix is invertible exactly when its constant-term
    matrix is. Returns the N x R solution as a nested list.
    """
    n = len(rows)
    a = [list(r) for r in rows]
    b = [list(r) for r in rhs_columns]
    perm = list(range(n))
    for k in range(n):
        piv = max(range(k, n), key=lambda r: abs(a[r][k].value))
        if abs(a[piv][k].value) == 0.0:
            raise SingularPivot("zero pivot in jet linear solve")
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            b[k], b[piv] = b[piv], b[k]
            perm[k], perm[piv] = perm[piv], perm[k]
        inv = a[k][k].inverse()
        for j in range(k + 1, n):
            a[k][j] = a[k][j] * inv
        b[k] = [x * inv for x in b[k]]
        for r in range(k + 1, n):
            f = a[r][k]
            if f.max_abs() == 0.0:
                continue
            for j in range(k + 1, n):
                a[r][j] = a[r][j] - f * a[k][j]
            b[r] = [x - f * y for x, y in zip(b[r], b[k])]
    # back substitution (diagonal is 1 after row normalization)
    x = [None] * n
    for k in range(n - 1, -1, -1):
        acc = list(b[k])
        for j in range(k + 1, n):
            fj = a[k][j]
            if fj.max_abs() == 0.0:
                continue
            acc = [ai - fj * xj for ai, xj in zip(acc, x[j])]
        x[k] = acc
    return x
