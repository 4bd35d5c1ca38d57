"""Decision procedures for CR + dual-CR decomposability at sample points.

For n = 2 the residual system is XXTu = 0 = TTXu; for n > 2 it is
X_jk Ttilde_jkl u = 0 over all distinct triples, with the companion system
T_jk Xtilde_jkl u = 0 available as a cross-check (the first system implies
it). All nested derivative applications happen jet-to-jet so third-order
operators are exact to the truncation degree.

Vanishing of the residuals at the sampled points is a pointwise-necessary
condition; global sufficiency additionally needs simple connectivity, which
is not verified here. Reports therefore classify as
"decomposable-consistent", never "decomposable".

When a sample point violates the pairwise condition z_j w_j + z_k w_k != 0
(n > 2), the point is moved by an invertible linear map that restores it, the
test function is pulled back accordingly, and the residuals are computed in
the repaired coordinates.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import DualCRError
from .fields import apply_field, build_field
from .forms import lambda_of
from .hypersurface import (
    Chart,
    Surface,
    SurfacePoint,
    dual_map,
    make_chart,
    repair_star,
    star_margins,
)
from .jets import Jet


def u_scale(u_jet: Jet) -> float:
    """Largest derivative magnitude of u up to third order at the point.

    The residual operators are third order in u but carry lower-order terms
    with O(1) geometric coefficients, so orders 1..3 all enter the scale.
    """
    mags = u_jet.derivative_magnitudes()
    deg = u_jet.space.degrees
    mask = (deg >= 1) & (deg <= 3)
    return float(np.max(mags[mask])) if np.any(mask) else 0.0


@dataclass
class PointRecord:
    z: np.ndarray
    residuals: dict
    star_margin: float
    scale: float = 0.0
    skipped: str | None = None
    repaired: bool = False
    repair_matrix: np.ndarray | None = None
    lam: complex | None = None
    cond: float | None = None


@dataclass
class ResidualReport:
    surface: str
    u: str
    seed: int
    order: int
    points: list
    max_abs: float = 0.0
    median_abs: float = 0.0
    scale: float = 0.0
    classification: str = "inconclusive"


@dataclass
class PointContext:
    """Chart (possibly in repaired coordinates) prepared for one point."""

    point: SurfacePoint
    chart: Chart | None
    star_margin: float
    repaired: bool = False
    repair_matrix: np.ndarray | None = None
    z_map: list | None = None
    w_map: list | None = None
    error: str | None = None

    def eval_u(self, u: ex.Expr) -> Jet:
        u_eff = ex.substitute(u, self.z_map, self.w_map) if self.repaired else u
        return ex.eval_jet(u_eff, self.chart)


def prepare_contexts(surface: Surface, points, order: int = 5, seed: int = 42,
                     repair: bool = False) -> list:
    """Charts for each point; with repair=True (n > 2), points failing the
    pairwise margin are transported to repaired coordinates first."""
    out = []
    for i, p in enumerate(points):
        out.append(_prepare_one(surface, p, order, repair, repair_seed=[seed, i]))
    return out


def _prepare_one(surface, p, order, repair, repair_seed):
    try:
        w = dual_map(surface, p)
        margin = min(star_margins(p.z, w).values())
        if repair and surface.n > 2 and margin <= surface.tol.star_repair:
            m = repair_star(surface, p, repair_seed)
            moved = surface.linear_image(m)
            p2 = moved.point(m @ p.z)
            chart = make_chart(moved, p2, order)
            minv = np.linalg.inv(m)
            z_map = [ex.linear_combination(minv[j], "z") for j in range(surface.n)]
            w_map = [ex.linear_combination(m[:, j], "w") for j in range(surface.n)]
            return PointContext(p, chart, margin, repaired=True, repair_matrix=m,
                                z_map=z_map, w_map=w_map)
        chart = make_chart(surface, p, order)
        return PointContext(p, chart, margin)
    except DualCRError as err:
        return PointContext(p, None, float("nan"),
                            error=f"{type(err).__name__}: {err}")


def _skipped_record(ctx) -> PointRecord:
    return PointRecord(z=ctx.point.z, residuals={}, star_margin=ctx.star_margin,
                       skipped=ctx.error)


def _finish(surface, u_text, seed, order, records, tol) -> ResidualReport:
    vals = [abs(v) for r in records for v in r.residuals.values()]
    scale = max((r.scale for r in records if r.skipped is None), default=0.0)
    max_abs = max(vals, default=0.0)
    median = float(np.median(vals)) if vals else 0.0
    any_skipped = any(r.skipped is not None for r in records)
    return ResidualReport(
        surface=surface.spec, u=u_text, seed=seed, order=order, points=records,
        max_abs=max_abs, median_abs=median, scale=scale,
        classification=classify(max_abs, scale, any_skipped, tol),
    )


def classify(max_abs: float, scale: float, any_skipped: bool, tol) -> str:
    """Three-way verdict. Rejection wins over inconclusiveness; a clean pass
    needs every point computed and every residual under the tight threshold."""
    s = scale if scale > 0 else 1.0
    if max_abs > tol.reject * s:
        return "rejected"
    if any_skipped or max_abs >= tol.consistent * s:
        return "inconclusive"
    return "decomposable-consistent"


def _triples(n: int):
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            for l in range(1, n + 1):
                if l != j and l != k:
                    yield j, k, l


def theorem_a_residuals(surface: Surface, u: ex.Expr, points, order: int = 5,
                        seed: int = 42, contexts=None) -> ResidualReport:
    """XXTu and TTXu at each point (n = 2)."""
    if surface.n != 2:
        raise ValueError("the third-order test applies to n = 2")
    if order < 5:
        raise ValueError("third-order residuals need jet order >= 5")
    if contexts is None:
        contexts = prepare_contexts(surface, points, order, seed)
    records = []
    for ctx in contexts:
        if ctx.error:
            records.append(_skipped_record(ctx))
            continue
        chart = ctx.chart
        u_jet = ctx.eval_u(u)
        x = build_field(chart, "X")
        t = build_field(chart, "T")
        res = {
            "XXTu": apply_field(x, apply_field(x, apply_field(t, u_jet))).value,
            "TTXu": apply_field(t, apply_field(t, apply_field(x, u_jet))).value,
        }
        records.append(PointRecord(
            z=ctx.point.z, residuals=res, star_margin=ctx.star_margin,
            scale=u_scale(u_jet), cond=chart._memo.get("diag:cond")))
    return _finish(surface, ex.pretty(u), seed, order, records, surface.tol)


def theorem_b_residuals(surface: Surface, u: ex.Expr, points, order: int = 5,
                        seed: int = 42, check_companion: bool = False,
                        contexts=None) -> ResidualReport:
    """X_jk Ttilde_jkl u over all distinct triples (n > 2), with repair."""
    if surface.n <= 2:
        raise ValueError("the second-order test applies to n > 2")
    if order < 5:
        raise ValueError("nested residuals need jet order >= 5")
    if contexts is None:
        contexts = prepare_contexts(surface, points, order, seed, repair=True)
    records = []
    for ctx in contexts:
        if ctx.error:
            records.append(_skipped_record(ctx))
            continue
        chart = ctx.chart
        u_jet = ctx.eval_u(u)
        res = {}
        for j, k, l in _triples(surface.n):
            tt = build_field(chart, f"Ttilde_{j}{k}{l}")
            xjk = build_field(chart, f"X_{j}{k}")
            res[f"X_{j}{k} T~_{j}{k}{l} u"] = apply_field(
                xjk, apply_field(tt, u_jet)).value
            if check_companion:
                xt = build_field(chart, f"Xtilde_{j}{k}{l}")
                tjk = build_field(chart, f"T_{j}{k}")
                res[f"T_{j}{k} X~_{j}{k}{l} u"] = apply_field(
                    tjk, apply_field(xt, u_jet)).value
        records.append(PointRecord(
            z=ctx.point.z, residuals=res, star_margin=ctx.star_margin,
            scale=u_scale(u_jet), repaired=ctx.repaired,
            repair_matrix=ctx.repair_matrix, cond=chart._memo.get("diag:cond")))
    return _finish(surface, ex.pretty(u), seed, order, records, surface.tol)


def lambda_consistency(surface: Surface, u: ex.Expr, points, order: int = 5,
                       seed: int = 42, contexts=None) -> ResidualReport:
    """lambda and the worst-case deviation of nu_p + lambda d theta (n > 2)
    or of the closedness expansion coefficients (n = 2)."""
    if order < 5:
        raise ValueError("lambda diagnostics need jet order >= 5")
    if contexts is None:
        contexts = prepare_contexts(surface, points, order, seed,
                                    repair=surface.n > 2)
    records = []
    for ctx in contexts:
        if ctx.error:
            records.append(_skipped_record(ctx))
            continue
        u_jet = ctx.eval_u(u)
        result = lambda_of(ctx.chart, u_jet)
        records.append(PointRecord(
            z=ctx.point.z,
            residuals={"lambda-deviation": complex(result.deviation)},
            star_margin=ctx.star_margin, scale=u_scale(u_jet),
            repaired=ctx.repaired, repair_matrix=ctx.repair_matrix,
            lam=result.lam))
    return _finish(surface, ex.pretty(u), seed, order, records, surface.tol)


def run_decomposition(surface: Surface, u: ex.Expr, points, order: int = 5,
                      seed: int = 42, check_companion: bool = False) -> ResidualReport:
    """Theorem test appropriate to the dimension, merged with the lambda
    diagnostics point by point (the CLI `test-decomp` payload)."""
    contexts = prepare_contexts(surface, points, order, seed,
                                repair=surface.n > 2)
    if surface.n == 2:
        main = theorem_a_residuals(surface, u, points, order, seed, contexts=contexts)
    else:
        main = theorem_b_residuals(surface, u, points, order, seed,
                                   check_companion=check_companion, contexts=contexts)
    lam = lambda_consistency(surface, u, points, order, seed, contexts=contexts)
    for rec, lrec in zip(main.points, lam.points):
        if rec.skipped or lrec.skipped:
            continue
        rec.residuals.update(lrec.residuals)
        rec.lam = lrec.lam
    return _finish(surface, main.u, seed, order, main.points, surface.tol)


# -- serialization ---------------------------------------------------------------


def _c2(v: complex):
    return [float(np.real(v)), float(np.imag(v))]


def report_to_dict(r: ResidualReport) -> dict:
    pts = []
    for rec in r.points:
        p = {
            "z": [_c2(zj) for zj in rec.z],
            "residuals": {name: _c2(v) for name, v in rec.residuals.items()},
            "star_margin": None if np.isnan(rec.star_margin) else float(rec.star_margin),
        }
        if rec.lam is not None:
            p["lambda"] = _c2(rec.lam)
        if rec.repaired:
            p["repaired"] = True
            p["repair_matrix"] = [[_c2(v) for v in row] for row in rec.repair_matrix]
        if rec.cond is not None:
            p["cond"] = float(rec.cond)
        if rec.skipped is not None:
            p["skipped"] = rec.skipped
        pts.append(p)
    return {
        "surface": r.surface,
        "u": r.u,
        "seed": r.seed,
        "order": r.order,
        "points": pts,
        "summary": {
            "max_abs": r.max_abs,
            "median_abs": r.median_abs,
            "scale": r.scale,
            "classification": r.classification,
        },
    }


def report_to_json(r: ResidualReport) -> str:
    return json.dumps(report_to_dict(r), indent=2) + "\n"


def report_to_csv(r: ResidualReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["point", "z", "residual", "re", "im", "abs",
                     "star_margin", "skipped"])
    for i, rec in enumerate(r.points):
        zs = ";".join(f"{zj.real!r}{zj.imag:+}j" for zj in rec.z)
        if rec.skipped is not None:
            writer.writerow([i, zs, "", "", "", "", rec.star_margin, rec.skipped])
            continue
        for name, v in rec.residuals.items():
            writer.writerow([i, zs, name, float(np.real(v)), float(np.imag(v)),
                             abs(v), rec.star_margin, ""])
    return buf.getvalue()


# -- seeded test-function corpora ---------------------------------------------------


def _random_poly(rng, n: int, kind: str, terms: int, degree: int) -> ex.Expr:
    out = None
    for _ in range(terms):
        total = int(rng.integers(1, degree + 1))
        expo = np.zeros(n, dtype=int)
        for _ in range(total):
            expo[int(rng.integers(0, n))] += 1
        coeff = complex(rng.standard_normal(), rng.standard_normal())
        term: ex.Expr = ex.Lit(coeff)
        for idx, e in enumerate(expo):
            if e == 0:
                continue
            sym = ex.Sym(kind, idx + 1)
            term = ex.Mul(term, sym if e == 1 else ex.Pow(sym, int(e)))
        out = term if out is None else ex.Add(out, term)
    return out


def decomposable_corpus(n: int, count: int, seed: int, terms: int = 3,
                        degree: int = 3) -> list:
    """u = f(z) + g(w) with random polynomial f, g of degree <= 3."""
    rng = np.random.default_rng(seed)
    return [
        ex.Add(_random_poly(rng, n, "z", terms, degree),
               _random_poly(rng, n, "w", terms, degree))
        for _ in range(count)
    ]


def nondecomposable_corpus(n: int, count: int, seed: int) -> list:
    """Mixed products z_j * w_k (scaled), the canonical non-examples."""
    rng = np.random.default_rng(seed)
    out = []
    pairs = [(j, k) for j in range(1, n + 1) for k in range(1, n + 1)]
    for i in range(count):
        j, k = pairs[i % len(pairs)]
        coeff = complex(rng.standard_normal(), rng.standard_normal())
        out.append(ex.Mul(ex.Lit(coeff), ex.Mul(ex.Sym("z", j), ex.Sym("w", k))))
    return out
