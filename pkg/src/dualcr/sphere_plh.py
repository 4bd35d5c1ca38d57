"""Classical pluriharmonic-trace operators on the unit sphere, and the
cross-check against the projective decomposition residuals.

On the sphere the dual map is coordinate conjugation (w = zbar), so dual-CR
coincides with conjugate-CR and the projective tests must reproduce the
classical ones. With the identifications X_jk = -L_jk, T_jk = -Lbar_jk,
Ttilde_jkl = -Ltilde_jkl that come from comparing action tables:

    n = 2:  XXTu = -L12 L12 Lbar12 u,   TTXu = -Lbar12 Lbar12 L12 u
    n > 2:  X_jk Ttilde_jkl u = L_jk Ltilde_jkl u

The L fields are built through the same chart / linear-solve machinery as the
X and T fields (their action tables are written in z and zbar), so the
cross-check exercises one code path against an independent specification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .decompose import (
    PointRecord,
    ResidualReport,
    _finish,
    _skipped_record,
    _triples,
    prepare_contexts,
    u_scale,
)
from .errors import DualCRError
from .fields import apply_field, build_field
from .hypersurface import Surface


def _pairs(n: int):
    return [(j, k) for j in range(1, n + 1) for k in range(j + 1, n + 1)]


def audibert_residuals(u: ex.Expr, points, n: int, order: int = 5,
                       mode: str = "third_order", seed: int = 42,
                       contexts=None) -> ResidualReport:
    """Pluriharmonic-trace residual systems on the unit sphere.

    mode="third_order": L_jk L_lm Lbar_rs u and Lbar_jk Lbar_lm L_rs u over
    index pairs j<k, l<m, r<s (antisymmetry makes other orderings redundant).
    mode="second_order" (n > 2): L_jk Ltilde_jkl u over distinct triples.
    """
    if mode not in ("third_order", "second_order"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "second_order" and n <= 2:
        raise ValueError("the second-order system needs n > 2")
    if order < 5:
        raise ValueError("third-order jets need order >= 5")
    surface = Surface.sphere(n)
    if contexts is None:
        contexts = prepare_contexts(surface, points, order, seed)
    records = []
    for ctx in contexts:
        if ctx.error:
            records.append(_skipped_record(ctx))
            continue
        chart = ctx.chart
        u_jet = ctx.eval_u(u)
        res = {}
        if mode == "second_order":
            for j, k, l in _triples(n):
                ljk = build_field(chart, f"L_{j}{k}")
                lt = build_field(chart, f"Ltilde_{j}{k}{l}")
                res[f"L_{j}{k} L~_{j}{k}{l} u"] = apply_field(
                    ljk, apply_field(lt, u_jet)).value
        else:
            pp = _pairs(n)
            for (j, k) in pp:
                for (l, m) in pp:
                    for (r, s) in pp:
                        a = build_field(chart, f"L_{j}{k}")
                        b = build_field(chart, f"L_{l}{m}")
                        c = build_field(chart, f"Lbar_{r}{s}")
                        res[f"L_{j}{k} L_{l}{m} Lbar_{r}{s} u"] = apply_field(
                            a, apply_field(b, apply_field(c, u_jet))).value
                        ab = build_field(chart, f"Lbar_{j}{k}")
                        bb = build_field(chart, f"Lbar_{l}{m}")
                        cb = build_field(chart, f"L_{r}{s}")
                        res[f"Lbar_{j}{k} Lbar_{l}{m} L_{r}{s} u"] = apply_field(
                            ab, apply_field(bb, apply_field(cb, u_jet))).value
        records.append(PointRecord(
            z=ctx.point.z, residuals=res, star_margin=ctx.star_margin,
            scale=u_scale(u_jet)))
    return _finish(surface, ex.pretty(u), seed, order, records, surface.tol)


@dataclass
class CrossCheckReport:
    surface: str
    u: str
    identity_residuals: list      # per point: dict name -> float
    max_identity_residual: float
    dual_conjugation_gap: float   # max |w_jets - conj(z_jets)| coefficient


def cross_check(u: ex.Expr, points, n: int, order: int = 5,
                seed: int = 42) -> CrossCheckReport:
    """Pointwise identity between the projective and classical residuals.

    n = 2: |XXTu + L12 L12 Lbar12 u| and |TTXu + Lbar12 Lbar12 L12 u|.
    n > 2: |X_jk Ttilde_jkl u - L_jk Ltilde_jkl u| for all distinct triples.
    """
    surface = Surface.sphere(n)
    contexts = prepare_contexts(surface, points, order, seed)
    per_point = []
    worst = 0.0
    conj_gap = 0.0
    for ctx in contexts:
        if ctx.error:
            per_point.append({"skipped": ctx.error})
            continue
        chart = ctx.chart
        conj_gap = max(conj_gap, max(
            (wj - zj.conj()).max_abs()
            for zj, wj in zip(chart.z_jets, chart.w_jets)))
        u_jet = ctx.eval_u(u)
        res = {}
        if n == 2:
            x = build_field(chart, "X")
            t = build_field(chart, "T")
            l12 = build_field(chart, "L_12")
            lb12 = build_field(chart, "Lbar_12")
            xxt = apply_field(x, apply_field(x, apply_field(t, u_jet))).value
            lllb = apply_field(l12, apply_field(l12, apply_field(lb12, u_jet))).value
            ttx = apply_field(t, apply_field(t, apply_field(x, u_jet))).value
            lblbl = apply_field(lb12, apply_field(lb12, apply_field(l12, u_jet))).value
            res["XXTu + L_12 L_12 Lbar_12 u"] = abs(xxt + lllb)
            res["TTXu + Lbar_12 Lbar_12 L_12 u"] = abs(ttx + lblbl)
        else:
            for j, k, l in _triples(n):
                xv = apply_field(
                    build_field(chart, f"X_{j}{k}"),
                    apply_field(build_field(chart, f"Ttilde_{j}{k}{l}"), u_jet),
                ).value
                lv = apply_field(
                    build_field(chart, f"L_{j}{k}"),
                    apply_field(build_field(chart, f"Ltilde_{j}{k}{l}"), u_jet),
                ).value
                res[f"triple {j}{k}{l}"] = abs(xv - lv)
        worst = max(worst, max(res.values()))
        per_point.append(res)
    return CrossCheckReport(
        surface=surface.spec,
        u=ex.pretty(u),
        identity_residuals=per_point,
        max_identity_residual=worst,
        dual_conjugation_gap=conj_gap,
    )
