"""Command-line front end.

Commands:
  check-structure   structural margins, coframe equations, bracket tables
  test-decomp       decomposability residuals (dimension picks the system)
  dual-map          table of dual-map values at sampled points
  incidence-check   pushforward identities on the incidence quadric (n = 2)
  sphere-plh        classical sphere operators and the cross-check

Exit codes: 0 all checks pass / consistent with decomposability, 2 rejected,
3 inconclusive (some point degenerated or residuals in the gray band),
1 usage or runtime error. Output (JSON or CSV) is deterministic for a fixed
seed and configuration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys

import numpy as np

from . import decompose as dec
from . import expr as ex
from . import incidence as inc
from . import sphere_plh as plh
from .errors import DualCRError
from .fields import apply_field, bracket, build_field, xt_fields
from .forms import eval_forms, exterior_at_base, theta_cov, wedge_rows
from .hypersurface import (
    Surface,
    Tolerances,
    check_structure,
    dual_map,
    sample_points,
)

EXIT_BY_CLASSIFICATION = {
    "decomposable-consistent": 0,
    "rejected": 2,
    "inconclusive": 3,
}


@dataclasses.dataclass
class RunConfig:
    command: str
    surface: str | None = None
    u: str | None = None
    rho: str | None = None
    num_points: int = 100
    seed: int = 42
    order: int = 5
    tol_overrides: dict = dataclasses.field(default_factory=dict)
    out: str | None = None
    fmt: str = "json"
    mode: str = "auto"
    companion: bool = False


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualcr",
        description="Numerical tests for CR + dual-CR decomposability on "
                    "strongly C-convex hypersurfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_u=False):
        p.add_argument("--surface", help="sphere:n=<N> | ellipsoid:<a1>,..,<aN> | poly:<expr>")
        p.add_argument("--rho", help="defining-function expression (same as poly:<expr>)")
        p.add_argument("--u", required=needs_u, help="test function expression")
        p.add_argument("--points", type=int, default=100, dest="num_points")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--order", type=int, default=5)
        p.add_argument("--tol", action="append", default=[],
                       help="override, e.g. --tol reject=1e-5 (repeatable)")
        p.add_argument("--out", help="write the report to this path")
        p.add_argument("--format", choices=("json", "csv"), default="json",
                       dest="fmt")

    common(sub.add_parser("check-structure", help="structural hypothesis suite"))
    p = sub.add_parser("test-decomp", help="decomposability residuals")
    common(p, needs_u=True)
    p.add_argument("--companion", action="store_true",
                   help="also compute the companion residuals (n > 2)")
    common(sub.add_parser("dual-map", help="dual-map table"))
    common(sub.add_parser("incidence-check", help="incidence-quadric suite (n = 2)"))
    p = sub.add_parser("sphere-plh", help="sphere pluriharmonic operators")
    common(p, needs_u=True)
    p.add_argument("--mode", choices=("auto", "third_order", "second_order"),
                   default="auto")
    return parser


def config_from_args(args) -> RunConfig:
    overrides = {}
    for item in args.tol:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"malformed --tol override {item!r}")
        overrides[name] = float(value)
    return RunConfig(
        command=args.command,
        surface=args.surface,
        u=getattr(args, "u", None),
        rho=args.rho,
        num_points=args.num_points,
        seed=args.seed,
        order=args.order,
        tol_overrides=overrides,
        out=args.out,
        fmt=args.fmt,
        mode=getattr(args, "mode", "auto"),
        companion=getattr(args, "companion", False),
    )


def _make_tolerances(overrides: dict) -> Tolerances:
    valid = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown tolerance names: {sorted(unknown)}")
    return dataclasses.replace(Tolerances(), **overrides)


def _surface_from_config(cfg: RunConfig) -> Surface:
    tol = _make_tolerances(cfg.tol_overrides)
    if cfg.rho:
        return Surface.from_expr(cfg.rho, tol=tol)
    if not cfg.surface:
        raise ValueError("a surface is required (--surface or --rho)")
    return Surface.parse_spec(cfg.surface, tol=tol)


def _emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _flat_csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# -- commands ------------------------------------------------------------------


def _cmd_test_decomp(cfg: RunConfig) -> int:
    surface = _surface_from_config(cfg)
    u = ex.parse(cfg.u, surface.n)
    points = sample_points(surface, cfg.num_points, cfg.seed)
    report = dec.run_decomposition(surface, u, points, order=cfg.order,
                                   seed=cfg.seed, check_companion=cfg.companion)
    if cfg.fmt == "json":
        _emit(cfg, dec.report_to_json(report))
    else:
        _emit(cfg, dec.report_to_csv(report))
    print(f"classification: {report.classification} "
          f"(max residual {report.max_abs:.3e}, scale {report.scale:.3e})",
          file=sys.stderr)
    return EXIT_BY_CLASSIFICATION[report.classification]


def _cmd_check_structure(cfg: RunConfig) -> int:
    surface = _surface_from_config(cfg)
    points = sample_points(surface, cfg.num_points, cfg.seed)
    tol = surface.tol
    pts_out = []
    all_ok = True
    any_skipped = False
    for p in points:
        entry = {"z": [dec._c2(zj) for zj in p.z]}
        try:
            rep = check_structure(surface, p)
            chart = None
            bracket_res = _bracket_table_residual(surface, p, cfg.order)
            entry.update({
                "no_hit_0_margin": rep.no_hit_0_margin,
                "addendum_margin": rep.addendum_margin,
                "addendum_ok": rep.addendum_ok,
                "levi_min_eig": rep.levi_min_eig,
                "star_margin": rep.star_margin,
                "dtheta_min_sv": rep.dtheta_min_sv,
                "bracket_residual": bracket_res,
                "ok": bool(rep.structural_ok and bracket_res < 1e-8),
            })
            if surface.n == 2:
                eq_res = _structure_equation_residual(surface, p, cfg.order)
                entry["structure_eq_residual"] = eq_res
                entry["ok"] = bool(entry["ok"] and eq_res < 1e-9)
            all_ok = all_ok and entry["ok"]
        except DualCRError as err:
            entry["skipped"] = f"{type(err).__name__}: {err}"
            any_skipped = True
        pts_out.append(entry)
    classification = ("inconclusive" if any_skipped
                      else ("decomposable-consistent" if all_ok else "rejected"))
    doc = {
        "surface": surface.spec,
        "seed": cfg.seed,
        "order": cfg.order,
        "points": pts_out,
        "summary": {"all_ok": all_ok, "classification": classification},
    }
    if cfg.fmt == "json":
        _emit(cfg, json.dumps(doc, indent=2) + "\n")
    else:
        rows = [
            (i, e.get("no_hit_0_margin"), e.get("addendum_margin"),
             e.get("levi_min_eig"), e.get("star_margin"),
             e.get("dtheta_min_sv"), e.get("bracket_residual"),
             e.get("ok"), e.get("skipped", ""))
            for i, e in enumerate(pts_out)
        ]
        _emit(cfg, _flat_csv(rows, ["point", "no_hit_0", "addendum", "levi",
                                    "star", "dtheta", "bracket", "ok", "skipped"]))
    print(f"structure suite: {'ok' if all_ok else 'FAILED'}", file=sys.stderr)
    return EXIT_BY_CLASSIFICATION[classification]


def _bracket_table_residual(surface, p, order) -> float:
    """Worst coefficient error in the commutator table at one point."""
    from .hypersurface import make_chart

    chart = make_chart(surface, p, order=min(order, 4))
    fields = xt_fields(chart)
    ups = fields["Upsilon"]
    worst = 0.0
    pair_names = [k for k in fields if k.startswith("X_")]
    if surface.n == 2:
        xt = bracket(fields["X_12"], fields["T_12"])
        worst = max(worst, _field_gap(xt, ups))
    for name in pair_names:
        x = fields[name]
        t = fields["T_" + name[2:]]
        worst = max(worst, _field_gap(bracket(ups, x), x, -2.0))
        worst = max(worst, _field_gap(bracket(ups, t), t, 2.0))
    return worst


def _field_gap(f, g, factor: float = 1.0) -> float:
    order = min(f.order, g.order)
    return max((a.trunc(order) - factor * b.trunc(order)).max_abs()
               for a, b in zip(f.coeffs, g.coeffs))


def _structure_equation_residual(surface, p, order) -> float:
    """d eta' = 2 eta'^theta, d eta'' = -2 eta''^theta, d theta = eta'^eta''."""
    from .forms import eta_cov, row_at_base
    from .hypersurface import make_chart

    chart = make_chart(surface, p, order=min(order, 3))
    th = theta_cov(chart)
    ep = eta_cov(chart, "prime", 1, 2)
    epp = eta_cov(chart, "dprime", 1, 2)
    th0, ep0, epp0 = row_at_base(th), row_at_base(ep), row_at_base(epp)
    res = [
        exterior_at_base(ep) - 2.0 * wedge_rows(ep0, th0),
        exterior_at_base(epp) + 2.0 * wedge_rows(epp0, th0),
        exterior_at_base(th) - wedge_rows(ep0, epp0),
    ]
    return float(max(np.max(np.abs(r)) for r in res))


def _cmd_dual_map(cfg: RunConfig) -> int:
    surface = _surface_from_config(cfg)
    points = sample_points(surface, cfg.num_points, cfg.seed)
    rows = []
    any_failed = False
    for p in points:
        entry = {"z": [dec._c2(zj) for zj in p.z]}
        try:
            w = dual_map(surface, p)
            entry["w"] = [dec._c2(wj) for wj in w]
            entry["pairing"] = dec._c2(np.dot(p.z, w))
        except DualCRError as err:
            entry["skipped"] = f"{type(err).__name__}: {err}"
            any_failed = True
        rows.append(entry)
    doc = {"surface": surface.spec, "seed": cfg.seed, "points": rows,
           "summary": {"all_defined": not any_failed}}
    if cfg.fmt == "json":
        _emit(cfg, json.dumps(doc, indent=2) + "\n")
    else:
        flat = []
        for i, e in enumerate(rows):
            if "skipped" in e:
                flat.append((i, e["z"], "", e["skipped"]))
            else:
                flat.append((i, e["z"], e["w"], ""))
        _emit(cfg, _flat_csv(flat, ["point", "z", "w", "skipped"]))
    return 0 if not any_failed else 3


def _cmd_incidence(cfg: RunConfig) -> int:
    surface = _surface_from_config(cfg)
    if surface.n != 2:
        raise ValueError("incidence-check requires an n = 2 surface")
    points = sample_points(surface, cfg.num_points, cfg.seed)
    pts_out = []
    worst = 0.0
    min_angle = float("inf")
    any_skipped = False
    for p in points:
        entry = {"z": [dec._c2(zj) for zj in p.z]}
        try:
            rep = inc.check_section4(surface, p, order=min(cfg.order, 3))
            entry.update({
                "push_vs_tangential": rep.push_vs_tangential,
                "type_identity": rep.type_identity,
                "total_reality_angle": rep.total_reality_angle,
            })
            worst = max(worst, rep.max_residual)
            min_angle = min(min_angle, rep.total_reality_angle)
        except DualCRError as err:
            entry["skipped"] = f"{type(err).__name__}: {err}"
            any_skipped = True
        pts_out.append(entry)
    ok = worst < 1e-8 and min_angle > 1e-6
    classification = ("inconclusive" if any_skipped
                      else ("decomposable-consistent" if ok else "rejected"))
    doc = {
        "surface": surface.spec, "seed": cfg.seed,
        "points": pts_out,
        "summary": {"max_residual": worst, "min_total_reality_angle": min_angle,
                    "ok": ok},
    }
    _emit(cfg, json.dumps(doc, indent=2) + "\n")
    return EXIT_BY_CLASSIFICATION[classification]


def _cmd_sphere_plh(cfg: RunConfig) -> int:
    surface = _surface_from_config(cfg)
    if surface.kind != "sphere":
        raise ValueError("sphere-plh requires a sphere:n=<N> surface")
    n = surface.n
    mode = cfg.mode
    if mode == "auto":
        mode = "second_order" if n > 2 else "third_order"
    u = ex.parse(cfg.u, n)
    points = sample_points(surface, cfg.num_points, cfg.seed)
    report = plh.audibert_residuals(u, points, n, order=cfg.order, mode=mode,
                                    seed=cfg.seed)
    cross = plh.cross_check(u, points, n, order=cfg.order, seed=cfg.seed)
    doc = dec.report_to_dict(report)
    doc["cross_check"] = {
        "max_identity_residual": cross.max_identity_residual,
        "dual_conjugation_gap": cross.dual_conjugation_gap,
    }
    if cfg.fmt == "json":
        _emit(cfg, json.dumps(doc, indent=2) + "\n")
    else:
        _emit(cfg, dec.report_to_csv(report))
    classification = report.classification
    if cross.max_identity_residual > 1e-8 and classification == "decomposable-consistent":
        classification = "inconclusive"
    print(f"classification: {classification} "
          f"(cross-check gap {cross.max_identity_residual:.3e})", file=sys.stderr)
    return EXIT_BY_CLASSIFICATION[classification]


_COMMANDS = {
    "check-structure": _cmd_check_structure,
    "test-decomp": _cmd_test_decomp,
    "dual-map": _cmd_dual_map,
    "incidence-check": _cmd_incidence,
    "sphere-plh": _cmd_sphere_plh,
}


def run(cfg: RunConfig) -> int:
    """Execute a configuration; returns the process exit code."""
    try:
        return _COMMANDS[cfg.command](cfg)
    except (DualCRError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = config_from_args(args)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
