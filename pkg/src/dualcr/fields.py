"""Tangential vector fields as jet-coefficient derivations on a chart.

A field is determined by its action table on the coordinate functions: for
n = 2 the pair X, T acts by

    X z1 = 0    X z2 = 0    X w1 = z2    X w2 = -z1
    T z1 = w2   T z2 = -w1  T w1 = 0     T w2 = 0

with Upsilon = [X, T] acting as Upsilon z_j = -z_j, Upsilon w_j = w_j. In
higher dimension the pairs X_jk, T_jk act the same way on the (j, k) slots,
and the tilde combinations are

    Ttilde_jkl = z_j T_lj + z_k T_lk,   Xtilde_jkl = w_j X_lj + w_k X_lk.

Building a field means solving a jet-valued linear system whose rows are the
differentials of the chart's z/w jets and whose right-hand sides come from the
action table. The differentials satisfy one linear relation along S (from
d(sum z_j w_j) = 0), so one dependent row is dropped and verified afterwards.

On the unit sphere the classical operators

    L_jk = z_j d/dzbar_k - z_k d/dzbar_j,   Lbar_jk = zbar_j d/dz_k - zbar_k d/dz_j

are built through the same machinery, with rows taken from the conjugated
coordinate jets instead of the dual-map jets.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateFrame, ResidualTooLarge
from .hypersurface import Chart
from .jets import Jet, jet_linear_solve


class FieldJet:
    """A tangential derivation sum_i c_i(t) d/dt_i with jet coefficients."""

    __slots__ = ("chart", "kind", "coeffs")

    def __init__(self, chart: Chart, kind: str, coeffs):
        self.chart = chart
        self.kind = kind
        self.coeffs = tuple(coeffs)

    @property
    def order(self) -> int:
        return self.coeffs[0].order

    def value(self) -> np.ndarray:
        """Chart-coordinate components at the base point."""
        return np.array([c.value for c in self.coeffs])

    def apply(self, u: Jet) -> Jet:
        return apply_field(self, u)

    __call__ = apply

    def __neg__(self):
        return FieldJet(self.chart, f"-{self.kind}", [-c for c in self.coeffs])

    def __repr__(self):
        return f"FieldJet({self.kind}, order={self.order})"


def apply_field(f: FieldJet, u: Jet) -> Jet:
    """Derivation action sum_i c_i du/dt_i; the output order drops by one."""
    out_order = min(u.order - 1, f.order)
    if out_order < 0:
        raise ValueError("jet order too low to differentiate")
    ut = u.trunc(out_order + 1)
    total = None
    for i, ci in enumerate(f.coeffs):
        if ci.max_abs() == 0.0:
            continue
        term = ci.trunc(out_order) * ut.partial(i).trunc(out_order)
        total = term if total is None else total + term
    if total is None:
        total = Jet.zero(ut.trunc(out_order).space)
    return total


def bracket(f: FieldJet, g: FieldJet) -> FieldJet:
    """Commutator [f, g] as a derivation; output order drops by one."""
    if f.chart is not g.chart:
        raise ValueError("bracket requires fields on the same chart")
    out_order = min(f.order, g.order) - 1
    coeffs = []
    for i in range(len(f.coeffs)):
        gi = g.coeffs[i].trunc(out_order + 1)
        fi = f.coeffs[i].trunc(out_order + 1)
        acc = None
        for j in range(len(f.coeffs)):
            fj = f.coeffs[j].trunc(out_order)
            gj = g.coeffs[j].trunc(out_order)
            term = None
            if fj.max_abs() != 0.0:
                term = fj * gi.partial(j).trunc(out_order)
            if gj.max_abs() != 0.0:
                t2 = gj * fi.partial(j).trunc(out_order)
                term = -t2 if term is None else term - t2
            if term is not None:
                acc = term if acc is None else acc + term
        coeffs.append(acc if acc is not None else Jet.zero(gi.trunc(out_order).space))
    return FieldJet(f.chart, f"[{f.kind},{g.kind}]", coeffs)


# -- kinds ---------------------------------------------------------------------


def _parse_kind(kind: str, n: int):
    """Normalize a kind string to (family, indices). Indices are 1-based."""
    name, _, digits = kind.partition("_")
    idx = tuple(int(d) for d in digits) if digits else ()
    if name in ("X", "T") and not idx:
        if n != 2:
            raise ValueError(f"kind {kind!r} needs explicit indices for n={n}")
        idx = (1, 2)
    if name == "Upsilon":
        if idx:
            raise ValueError("Upsilon carries no indices")
        return "Upsilon", ()
    if name in ("X", "T", "L", "Lbar"):
        if len(idx) != 2 or idx[0] == idx[1]:
            raise ValueError(f"kind {kind!r} needs two distinct indices")
    elif name in ("Xtilde", "Ttilde", "Ltilde"):
        if len(idx) != 3 or len(set(idx)) != 3:
            raise ValueError(f"kind {kind!r} needs three distinct indices")
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    if any(not 1 <= j <= n for j in idx):
        raise ValueError(f"kind {kind!r} has indices outside 1..{n}")
    return name, idx


def _row_jet(chart: Chart, fn: str, idx: int) -> Jet:
    if fn == "z":
        return chart.z_jets[idx - 1]
    if fn == "w":
        return chart.w_jets[idx - 1]
    if fn == "zbar":
        return chart.zbar_jets[idx - 1]
    raise ValueError(fn)


def action_rows(chart: Chart, kind: str):
    """Full defining action table of a kind: list of (fn, index, target jet).

    This is the contract a built field is tested against; the solver uses an
    invertible subset of these rows and checks the remainder.
    """
    n = chart.n
    k1 = chart.order - 1
    z = [zj.trunc(k1) for zj in chart.z_jets]
    w = [wj.trunc(k1) for wj in chart.w_jets]
    zero = Jet.zero(z[0].space)
    family, idx = _parse_kind(kind, n)

    def table(first_fn, second_fn, second_targets):
        rows = [(first_fn, m + 1, zero) for m in range(n)]
        rows += [(second_fn, m + 1, second_targets(m + 1)) for m in range(n)]
        return rows

    if family == "X":
        j, k = idx
        return table("z", "w", lambda m: z[k - 1] if m == j else (-z[j - 1] if m == k else zero))
    if family == "T":
        j, k = idx
        return table("w", "z", lambda m: w[k - 1] if m == j else (-w[j - 1] if m == k else zero))
    if family == "Upsilon":
        return ([("z", m + 1, -z[m]) for m in range(n)]
                + [("w", m + 1, w[m]) for m in range(n)])
    if family == "Ttilde":
        j, k, l = idx
        diag = z[j - 1] * w[j - 1] + z[k - 1] * w[k - 1]

        def tgt(m):
            if m == j:
                return -(z[j - 1] * w[l - 1])
            if m == k:
                return -(z[k - 1] * w[l - 1])
            if m == l:
                return diag
            return zero

        return table("w", "z", tgt)
    if family == "Xtilde":
        j, k, l = idx
        diag = z[j - 1] * w[j - 1] + z[k - 1] * w[k - 1]

        def tgt(m):
            if m == j:
                return -(z[l - 1] * w[j - 1])
            if m == k:
                return -(z[l - 1] * w[k - 1])
            if m == l:
                return diag
            return zero

        return table("z", "w", tgt)
    # sphere operators: rows in z and zbar
    zb = [zj.trunc(k1) for zj in chart.zbar_jets]
    if family == "L":
        j, k = idx
        return table("z", "zbar", lambda m: -z[k - 1] if m == j else (z[j - 1] if m == k else zero))
    if family == "Lbar":
        j, k = idx
        return table("zbar", "z", lambda m: -zb[k - 1] if m == j else (zb[j - 1] if m == k else zero))
    if family == "Ltilde":
        j, k, l = idx
        diag = z[j - 1] * zb[j - 1] + z[k - 1] * zb[k - 1]

        def tgt(m):
            if m == j:
                return z[j - 1] * zb[l - 1]
            if m == k:
                return z[k - 1] * zb[l - 1]
            if m == l:
                return -diag
            return zero

        return table("zbar", "z", tgt)
    raise ValueError(kind)


# -- solving ---------------------------------------------------------------------


def _differential_row(chart: Chart, fn: str, idx: int):
    """(d fn_idx / d t_i)_i as jets of order K-1."""
    k1 = chart.order - 1
    base = _row_jet(chart, fn, idx)
    m = chart.space.num_vars
    return [base.partial(i).trunc(k1) for i in range(m)]


def _solve_family(chart: Chart, solve_rows, kinds):
    """Solve one family of fields sharing a row set.

    solve_rows: list of (fn, idx) of length 2n-1. kinds: list of kind names.
    Every kind's full action table is consulted for targets; rows not in the
    solve set are verified afterwards (they are linearly dependent on S).
    """
    tol = chart.surface.tol
    m = chart.space.num_vars
    tables = {kind: action_rows(chart, kind) for kind in kinds}
    lookup = {
        kind: {(fn, idx): tgt for fn, idx, tgt in rows}
        for kind, rows in tables.items()
    }
    a = [_differential_row(chart, fn, idx) for fn, idx in solve_rows]
    a0 = np.array([[entry.value for entry in row] for row in a])
    cond = np.linalg.cond(a0)
    if not np.isfinite(cond) or cond > tol.cond_max:
        raise DegenerateFrame(f"field system condition number {cond:.3e}")
    b = [[lookup[kind][key] for kind in kinds] for key in solve_rows]
    x = jet_linear_solve(a, b)
    out = {}
    solve_set = set(solve_rows)
    for kidx, kind in enumerate(kinds):
        field = FieldJet(chart, kind, [x[i][kidx] for i in range(m)])
        scale = 1.0 + max(
            max(t.max_abs() for _, _, t in tables[kind]),
            float(np.max(np.abs(chart.z0))) ** 2,
        )
        for fn, idx, tgt in tables[kind]:
            if (fn, idx) in solve_set:
                continue
            res = field.apply(_row_jet(chart, fn, idx)) - tgt
            if res.max_abs() > tol.dropped_row * scale:
                raise ResidualTooLarge(
                    f"{kind}: dropped row d{fn}{idx} residual {res.max_abs():.3e}"
                )
        out[kind] = field
    return out


def _pair_kinds(prefix: str, n: int) -> list[str]:
    return [f"{prefix}_{j}{k}" for j in range(1, n + 1) for k in range(j + 1, n + 1)]


def _family_xtu_n2(chart: Chart):
    """n = 2: rows (dz1, dz2, dw_m), pivot m by largest constant determinant."""
    best = None
    for mm in (1, 2):
        rows = [("z", 1), ("z", 2), ("w", mm)]
        a0 = np.array([[e.value for e in _differential_row(chart, fn, idx)]
                       for fn, idx in rows])
        det = abs(np.linalg.det(a0))
        if best is None or det > best[0]:
            best = (det, rows)
    fields = _solve_family(chart, best[1], ["X_12", "T_12", "Upsilon"])
    return {"X_12": fields["X_12"], "T_12": fields["T_12"],
            "Upsilon": fields["Upsilon"]}


def _drop_one(pairs, weights):
    """Remove from `pairs` the entry whose dependency weight is largest."""
    drop = int(np.argmax(np.abs(weights)))
    return [p for i, p in enumerate(pairs) if i != drop]


def _family_rows(chart: Chart, family: str):
    n = chart.n
    z0 = chart.z0
    w0 = chart.w0
    if family == "X":
        keep = _drop_one([("w", m + 1) for m in range(n)], np.abs(z0))
        return [("z", m + 1) for m in range(n)] + keep
    if family == "T":
        keep = _drop_one([("z", m + 1) for m in range(n)], np.abs(w0))
        return keep + [("w", m + 1) for m in range(n)]
    if family == "Upsilon":
        rows = [("z", m + 1) for m in range(n)] + [("w", m + 1) for m in range(n)]
        dep = np.concatenate([np.abs(w0), np.abs(z0)])
        return _drop_one(rows, dep)
    if family == "L":
        keep = _drop_one([("zbar", m + 1) for m in range(n)], np.abs(z0))
        return [("z", m + 1) for m in range(n)] + keep
    if family == "Lbar":
        keep = _drop_one([("z", m + 1) for m in range(n)], np.abs(z0))
        return keep + [("zbar", m + 1) for m in range(n)]
    raise ValueError(family)


def _require_sphere(chart: Chart):
    if chart.surface.kind != "sphere":
        raise ValueError("L-type operators are defined on the unit sphere")


def _base_fields(chart: Chart, family: str) -> dict:
    """All solved (non-tilde) fields of a family on this chart, memoized."""
    n = chart.n

    def build():
        if family in ("X", "T", "Upsilon") and n == 2:
            return _family_xtu_n2(chart)
        if family == "Upsilon":
            return _solve_family(chart, _family_rows(chart, "Upsilon"), ["Upsilon"])
        kinds = _pair_kinds(family, n)
        return _solve_family(chart, _family_rows(chart, family), kinds)

    key = "fields:XTU" if (family in ("X", "T", "Upsilon") and n == 2) else f"fields:{family}"
    return chart.memo(key, build)


def _signed_pair(chart: Chart, family: str, j: int, k: int) -> FieldJet:
    """X_jk / T_jk / L_jk / Lbar_jk for arbitrary ordered indices (antisymmetric)."""
    if chart.n == 2 and family in ("X", "T"):
        base = _base_fields(chart, family)[f"{family}_12"]
        return base if (j, k) == (1, 2) else -base
    fields = _base_fields(chart, family)
    if j < k:
        return fields[f"{family}_{j}{k}"]
    return -fields[f"{family}_{k}{j}"]


def _combine(chart: Chart, kind: str, terms) -> FieldJet:
    """Jet-coefficient linear combination of already built fields."""
    order = min(f.order for _, f in terms)
    m = chart.space.num_vars
    coeffs = []
    for i in range(m):
        acc = None
        for cjet, f in terms:
            t = cjet.trunc(order) * f.coeffs[i].trunc(order)
            acc = t if acc is None else acc + t
        coeffs.append(acc)
    return FieldJet(chart, kind, coeffs)


def build_field(chart: Chart, kind: str) -> FieldJet:
    """Construct the field named by `kind` on the chart (memoized).

    Kinds: "X", "T", "Upsilon" (n = 2), "X_jk", "T_jk", "Upsilon" (n > 2),
    "Ttilde_jkl", "Xtilde_jkl", and on the unit sphere "L_jk", "Lbar_jk",
    "Ltilde_jkl".
    """
    n = chart.n
    family, idx = _parse_kind(kind, n)

    def get():
        if family in ("L", "Lbar", "Ltilde"):
            _require_sphere(chart)
        if family == "Upsilon":
            return _base_fields(chart, "Upsilon")["Upsilon"]
        if family in ("X", "T", "L", "Lbar"):
            return _signed_pair(chart, family, *idx)
        j, k, l = idx
        if family == "Ttilde":
            terms = [(chart.z_jets[j - 1], _signed_pair(chart, "T", l, j)),
                     (chart.z_jets[k - 1], _signed_pair(chart, "T", l, k))]
        elif family == "Xtilde":
            terms = [(chart.w_jets[j - 1], _signed_pair(chart, "X", l, j)),
                     (chart.w_jets[k - 1], _signed_pair(chart, "X", l, k))]
        else:  # Ltilde
            terms = [(chart.z_jets[j - 1], _signed_pair(chart, "Lbar", l, j)),
                     (chart.z_jets[k - 1], _signed_pair(chart, "Lbar", l, k))]
        return _combine(chart, kind, terms)

    canonical = family if family == "Upsilon" else f"{family}_{''.join(map(str, idx))}"
    return chart.memo(f"field:{canonical}", get)


def xt_fields(chart: Chart) -> dict:
    """All X_jk, T_jk (j < k) plus Upsilon on this chart."""
    n = chart.n
    out = {}
    if n == 2:
        base = _base_fields(chart, "X")
        out.update({"X_12": base["X_12"], "T_12": base["T_12"],
                    "Upsilon": base["Upsilon"]})
        return out
    for kind in _pair_kinds("X", n):
        out[kind] = build_field(chart, kind)
    for kind in _pair_kinds("T", n):
        out[kind] = build_field(chart, kind)
    out["Upsilon"] = build_field(chart, "Upsilon")
    return out
