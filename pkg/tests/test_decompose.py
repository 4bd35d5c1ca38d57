import json

import numpy as np
import pytest

from dualcr import Surface, dual_map, sample_points, star_margins
from dualcr import expr as ex
from dualcr.decompose import (
    classify,
    decomposable_corpus,
    lambda_consistency,
    nondecomposable_corpus,
    prepare_contexts,
    report_to_csv,
    report_to_dict,
    report_to_json,
    run_decomposition,
    theorem_a_residuals,
    theorem_b_residuals,
    u_scale,
)
from dualcr.hypersurface import Tolerances


def test_theorem_a_decomposable(sphere2):
    pts = sample_points(sphere2, 8, seed=1)
    rep = theorem_a_residuals(sphere2, ex.parse("z1^2 + 3.0*w2"), pts)
    assert rep.classification == "decomposable-consistent"
    assert rep.max_abs < 1e-8 * rep.scale


def test_theorem_a_witness_value(sphere2):
    p = sphere2.point(np.array([1, 1], dtype=complex) / np.sqrt(2))
    rep = theorem_a_residuals(sphere2, ex.parse("z1*w1"), [p])
    res = rep.points[0].residuals
    assert abs(res["XXTu"] - (-1.0)) < 1e-9
    assert abs(res["TTXu"] - (-1.0)) < 1e-9
    assert rep.classification == "rejected"


def test_theorem_a_conjugate_is_dual_cr(sphere2):
    pts = sample_points(sphere2, 8, seed=2)
    rep = theorem_a_residuals(sphere2, ex.parse("conj(z1)"), pts)
    assert rep.max_abs < 1e-8 * rep.scale
    assert rep.classification == "decomposable-consistent"


def test_theorem_b_witness_value(sphere3):
    p = sphere3.point(np.ones(3, dtype=complex) / np.sqrt(3))
    rep = theorem_b_residuals(sphere3, ex.parse("z1*w1"), [p], check_companion=True)
    res = rep.points[0].residuals
    want = -(3.0 ** -1.5)
    assert abs(res["X_12 T~_123 u"] - want) < 1e-9
    assert abs(res["T_12 X~_123 u"] - want) < 1e-9


def test_theorem_b_residual_closed_forms(sphere3):
    # X_12 T~_123 u = -z1 z2 w3 and companion = -z3 w1 w2 for u = z1 w1
    for p in sample_points(sphere3, 5, seed=3):
        rep = theorem_b_residuals(sphere3, ex.parse("z1*w1"), [p],
                                  check_companion=True)
        rec = rep.points[0]
        if rec.repaired:
            continue
        w = dual_map(sphere3, p)
        z = p.z
        assert abs(rec.residuals["X_12 T~_123 u"] - (-z[0] * z[1] * w[2])) < 1e-8
        assert abs(rec.residuals["T_12 X~_123 u"] - (-z[2] * w[0] * w[1])) < 1e-8


def test_theorem_b_decomposable(sphere3):
    pts = sample_points(sphere3, 6, seed=4)
    rep = theorem_b_residuals(sphere3, ex.parse("z2 + w3"), pts)
    assert rep.classification == "decomposable-consistent"


def test_theorem_b_repair_path(sphere3):
    p = sphere3.point([1.0, 0.0, 0.0])
    rep = theorem_b_residuals(sphere3, ex.parse("z2 + w3"), [p])
    rec = rep.points[0]
    assert rec.repaired
    assert rec.star_margin < 1e-12
    m = rec.repair_matrix
    z1 = m @ p.z
    w1 = np.linalg.solve(m.T, dual_map(sphere3, p))
    assert min(star_margins(z1, w1).values()) > 1e-6
    assert rep.classification == "decomposable-consistent"


def test_repair_same_verdict_as_nearby(sphere3):
    # flagged point vs a nearby unflagged point: same verdicts
    flagged = sphere3.point([1.0, 0.0, 0.0])
    from dualcr import project_to_surface
    nearby = project_to_surface(
        sphere3, np.array([1.0, 0.04 + 0.02j, 0.05 - 0.03j]))
    for u_text, verdict in [("z2 + w3", "decomposable-consistent"),
                            ("z3*w2", "rejected")]:
        u = ex.parse(u_text)
        rep_f = theorem_b_residuals(sphere3, u, [flagged])
        rep_n = theorem_b_residuals(sphere3, u, [nearby])
        assert rep_f.points[0].repaired
        assert not rep_n.points[0].repaired
        assert rep_f.classification == verdict
        assert rep_n.classification == verdict


def test_repair_invariance_identity_when_unflagged(sphere3):
    # at a point with healthy margin the repair path is the identity, so the
    # repaired and unrepaired computations coincide exactly
    p = sphere3.point(np.ones(3, dtype=complex) / np.sqrt(3))
    ctxs = prepare_contexts(sphere3, [p], order=5, seed=0, repair=True)
    assert not ctxs[0].repaired
    u = ex.parse("z1*w1")
    rep_plain = theorem_b_residuals(sphere3, u, [p])
    rep_ctx = theorem_b_residuals(sphere3, u, [p], contexts=ctxs)
    for name, val in rep_plain.points[0].residuals.items():
        assert val == rep_ctx.points[0].residuals[name]


def test_forced_transformation_preserves_verdict(sphere3):
    # verdicts are invariant under an explicit linear change of coordinates
    rng = np.random.default_rng(12)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    moved = sphere3.linear_image(q)
    minv = np.linalg.inv(q)
    z_map = [ex.linear_combination(minv[j], "z") for j in range(3)]
    w_map = [ex.linear_combination(q[:, j], "w") for j in range(3)]
    for u_text in ["z2 + w3", "z1*w1"]:
        u = ex.parse(u_text)
        u_moved = ex.substitute(u, z_map, w_map)
        verdicts = []
        for surface, uu, seed in [(sphere3, u, 21), (moved, u_moved, 21)]:
            pts_base = sample_points(sphere3, 4, seed=seed)
            pts = [surface.point(q @ p.z) if surface is moved else p
                   for p in pts_base]
            verdicts.append(theorem_b_residuals(surface, uu, pts).classification)
        assert verdicts[0] == verdicts[1]


def test_lambda_consistency_n2(sphere2):
    pts = sample_points(sphere2, 5, seed=6)
    rep = lambda_consistency(sphere2, ex.parse("z1*w1"), pts)
    for rec in rep.points:
        want = rec.z[1] * np.conj(rec.z[1]) - rec.z[0] * np.conj(rec.z[0])
        assert abs(rec.lam - want) < 1e-8
    rep2 = lambda_consistency(sphere2, ex.parse("z1^2 + w2"), pts)
    assert rep2.classification == "decomposable-consistent"


def test_lambda_consistency_matches_theorem_b(sphere3):
    pts = sample_points(sphere3, 5, seed=7)
    good = lambda_consistency(sphere3, ex.parse("z1 + w2"), pts)
    assert good.max_abs < 1e-8 * max(good.scale, 1.0)
    bad = lambda_consistency(sphere3, ex.parse("z1*w1"), pts)
    assert bad.classification == "rejected"


def test_lambda_constant(sphere2):
    pts = sample_points(sphere2, 2, seed=8)
    rep = lambda_consistency(sphere2, ex.parse("2.5"), pts)
    for rec in rep.points:
        assert rec.lam == 0
        assert abs(rec.residuals["lambda-deviation"]) < 1e-14


def test_soundness_small_corpus(sphere2, sphere3, ellipsoid2, ellipsoid3):
    for surface in (sphere2, ellipsoid2):
        pts = sample_points(surface, 3, seed=9)
        for u in decomposable_corpus(2, 4, seed=13):
            rep = theorem_a_residuals(surface, u, pts)
            assert rep.max_abs < 1e-7 * rep.scale, (surface.spec, rep.u)
    for surface in (sphere3, ellipsoid3):
        pts = sample_points(surface, 3, seed=9)
        for u in decomposable_corpus(3, 4, seed=14):
            rep = theorem_b_residuals(surface, u, pts)
            assert rep.max_abs < 1e-7 * rep.scale, (surface.spec, rep.u)


def test_nondecomposable_rejected(sphere3):
    pts = sample_points(sphere3, 4, seed=10)
    for u in nondecomposable_corpus(3, 4, seed=15):
        rep = theorem_b_residuals(sphere3, u, pts)
        assert rep.classification == "rejected"
        assert rep.max_abs > 1e-3 * rep.scale


def test_companion_follows_from_main(sphere3):
    pts = sample_points(sphere3, 3, seed=16)
    for u in decomposable_corpus(3, 3, seed=17):
        rep = theorem_b_residuals(sphere3, u, pts, check_companion=True)
        for rec in rep.points:
            main = [abs(v) for k, v in rec.residuals.items() if k.startswith("X_")]
            comp = [abs(v) for k, v in rec.residuals.items() if k.startswith("T_")]
            if max(main) < 1e-9:
                assert max(comp) < 1e-6 * max(rec.scale, 1.0)


def test_classification_rules():
    tol = Tolerances()
    assert classify(1e-3, 1.0, False, tol) == "rejected"
    assert classify(1e-7, 1.0, False, tol) == "inconclusive"
    assert classify(1e-9, 1.0, False, tol) == "decomposable-consistent"
    assert classify(1e-9, 1.0, True, tol) == "inconclusive"
    assert classify(0.0, 0.0, False, tol) == "decomposable-consistent"


def test_chart_independence_of_residuals(sphere2):
    from dualcr import make_chart
    from dualcr.decompose import PointContext

    p = sphere2.point(np.array([0.6, 0.8], dtype=complex))
    u = ex.parse("z1*w1 + z2^2")
    values = []
    for frame_seed in (None, 5):
        chart = make_chart(sphere2, p, order=5, frame_seed=frame_seed)
        ctx = PointContext(p, chart, 0.5)
        rep = theorem_a_residuals(sphere2, u, [p], contexts=[ctx])
        values.append(rep.points[0].residuals)
    for name in values[0]:
        a, b = values[0][name], values[1][name]
        assert abs(a - b) <= 1e-8 * (1.0 + abs(a))


def test_report_json_schema_and_determinism(sphere3):
    pts = sample_points(sphere3, 3, seed=11)
    u = ex.parse("z1*w1")
    r1 = run_decomposition(sphere3, u, pts, seed=11)
    r2 = run_decomposition(sphere3, u, pts, seed=11)
    j1, j2 = report_to_json(r1), report_to_json(r2)
    assert j1 == j2
    doc = json.loads(j1)
    assert set(doc) == {"surface", "u", "seed", "order", "points", "summary"}
    assert doc["surface"] == "sphere:n=3"
    pt = doc["points"][0]
    assert set(pt) >= {"z", "residuals", "star_margin"}
    assert "lambda" in pt
    assert len(pt["z"]) == 3 and len(pt["z"][0]) == 2
    for val in pt["residuals"].values():
        assert len(val) == 2
    assert doc["summary"]["classification"] == "rejected"


def test_report_csv_shape(sphere2):
    pts = sample_points(sphere2, 2, seed=12)
    rep = theorem_a_residuals(sphere2, ex.parse("z1*w1"), pts)
    lines = report_to_csv(rep).strip().split("\n")
    assert lines[0].startswith("point,")
    assert len(lines) == 1 + 2 * 2  # two residuals per point


def test_u_scale_reflects_derivatives(sphere2_chart):
    u = ex.eval_jet(ex.parse("10.0*z1"), sphere2_chart)
    s = u_scale(u)
    assert 1.0 < s < 50.0
    zero = u_scale(ex.eval_jet(ex.parse("7.0"), sphere2_chart))
    assert zero == 0.0


def test_skipped_points_make_report_inconclusive():
    rho = "(z1 - 2.0)*(conj(z1) - 2.0) + z2*conj(z2) - 4.0"
    s = Surface.from_expr(rho, n=2)
    bad = s.point([0.0, 0.0])  # dual map undefined here
    rep = theorem_a_residuals(s, ex.parse("z1"), [bad])
    assert rep.points[0].skipped is not None
    assert rep.classification == "inconclusive"
