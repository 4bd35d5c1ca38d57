import numpy as np
import pytest

from conftest import field_gap, jet_gap

from dualcr import Surface, make_chart, project_to_surface, sample_points
from dualcr import expr as ex
from dualcr.errors import ResidualTooLarge
from dualcr.fields import (
    FieldJet,
    action_rows,
    apply_field,
    bracket,
    build_field,
    xt_fields,
)
from dualcr.forms import h_frame
from dualcr.jets import Jet


def _check_action_table(chart, kind, tol=1e-9):
    f = build_field(chart, kind)
    scale = 1.0 + float(np.max(np.abs(chart.z0))) ** 2
    for fn, idx, tgt in action_rows(chart, kind):
        jet = {"z": chart.z_jets, "w": chart.w_jets, "zbar": chart.zbar_jets}[fn][idx - 1]
        gap = jet_gap(apply_field(f, jet), tgt)
        assert gap < tol * scale, (kind, fn, idx, gap)


ALL_KINDS_N2 = ["X", "T", "Upsilon"]
ALL_KINDS_N3 = (
    [f"X_{j}{k}" for j, k in [(1, 2), (1, 3), (2, 3)]]
    + [f"T_{j}{k}" for j, k in [(1, 2), (1, 3), (2, 3)]]
    + ["Upsilon", "Ttilde_123", "Ttilde_132", "Ttilde_231", "Xtilde_123"]
)


def test_action_tables_n2(charts_n2):
    for chart in charts_n2:
        for kind in ALL_KINDS_N2:
            _check_action_table(chart, kind)


def test_action_tables_n3(charts_n3):
    for chart in charts_n3:
        for kind in ALL_KINDS_N3:
            _check_action_table(chart, kind)


def test_x_ambient_form_on_sphere(charts_n2):
    # on the sphere X = z2 d/dzbar1 - z1 d/dzbar2 in ambient components
    for chart in charts_n2:
        if chart.surface.kind != "sphere":
            continue
        x = build_field(chart, "X")
        z1, z2 = (z.trunc(x.order) for z in chart.z_jets)
        assert jet_gap(apply_field(x, chart.zbar_jets[0]), z2) < 1e-9
        assert jet_gap(apply_field(x, chart.zbar_jets[1]), -z1) < 1e-9
        assert apply_field(x, chart.z_jets[0]).max_abs() < 1e-9


def test_upsilon_action(charts_n3):
    for chart in charts_n3:
        ups = build_field(chart, "Upsilon")
        for zj in chart.z_jets:
            assert jet_gap(apply_field(ups, zj), -zj) < 1e-9
        for wj in chart.w_jets:
            assert jet_gap(apply_field(ups, wj), wj) < 1e-9


def test_ttilde_kills_w(sphere3_chart):
    tt = build_field(sphere3_chart, "Ttilde_123")
    for wj in sphere3_chart.w_jets:
        assert apply_field(tt, wj).max_abs() < 1e-9


def test_apply_examples(sphere2_chart):
    chart = sphere2_chart
    x = build_field(chart, "X")
    u = ex.eval_jet(ex.parse("z1*w1"), chart)
    xu = apply_field(x, u)
    assert abs(xu.value - 0.5) < 1e-12  # X(z1 w1) = z1 z2 = 1/2 here
    t = build_field(chart, "T")
    const = Jet.constant(chart.space, 3.0 + 1j)
    assert apply_field(t, const).max_abs() == 0.0
    ups = build_field(chart, "Upsilon")
    assert apply_field(ups, u).max_abs() < 1e-10


def test_bracket_table_n2(charts_n2):
    for chart in charts_n2:
        x, t = build_field(chart, "X"), build_field(chart, "T")
        ups = build_field(chart, "Upsilon")
        assert field_gap(bracket(x, t), ups) < 1e-8
        assert field_gap(bracket(ups, x), x, factor=-2.0) < 1e-8
        assert field_gap(bracket(ups, t), t, factor=2.0) < 1e-8


def test_bracket_antisymmetry(sphere2_chart):
    x = build_field(sphere2_chart, "X")
    b = bracket(x, x)
    assert all(c.max_abs() < 1e-12 for c in b.coeffs)


def test_bracket_table_n3(charts_n3):
    for chart in charts_n3:
        ups = build_field(chart, "Upsilon")
        for j, k in [(1, 2), (1, 3), (2, 3)]:
            x = build_field(chart, f"X_{j}{k}")
            t = build_field(chart, f"T_{j}{k}")
            assert field_gap(bracket(ups, x), x, factor=-2.0) < 1e-8
            assert field_gap(bracket(ups, t), t, factor=2.0) < 1e-8


def test_relation_5_3(charts_n3):
    # z_j X_kl + z_k X_lj + z_l X_jk = 0 for (j,k,l) = (1,2,3)
    for chart in charts_n3:
        terms = []
        for j, k, l in [(1, 2, 3), (2, 3, 1), (3, 1, 2)]:
            sign_field = build_field(chart, f"X_{k}{l}") if k < l else -build_field(chart, f"X_{l}{k}")
            terms.append((chart.z_jets[j - 1], sign_field))
        order = min(f.order for _, f in terms)
        for i in range(chart.space.num_vars):
            acc = None
            for zj, f in terms:
                t = zj.trunc(order) * f.coeffs[i].trunc(order)
                acc = t if acc is None else acc + t
            assert acc.max_abs() < 1e-9


def test_h_prime_dprime_membership(sphere3_chart, ellipsoid3_chart):
    # X-kinds take values in H'' (no H' component), T-kinds in H'
    for chart in (sphere3_chart, ellipsoid3_chart):
        frame = h_frame(chart)
        for j, k in [(1, 2), (1, 3), (2, 3)]:
            xv = frame.to_h(build_field(chart, f"X_{j}{k}").value())
            tv = frame.to_h(build_field(chart, f"T_{j}{k}").value())
            xp, xpp = frame.split(xv)
            tp, tpp = frame.split(tv)
            assert np.linalg.norm(xp) < 1e-9 * (1 + np.linalg.norm(xv))
            assert np.linalg.norm(tpp) < 1e-9 * (1 + np.linalg.norm(tv))


def test_span_rank(sphere3_chart, ellipsoid3_chart):
    # with z1 w1 != 0 the X_1k (resp. T_1k) have full rank n-1
    for chart in (sphere3_chart, ellipsoid3_chart):
        frame = h_frame(chart)
        assert abs(chart.z0[0] * chart.w0[0]) > 1e-6
        xs = np.array([frame.to_h(build_field(chart, f"X_1{k}").value())
                       for k in (2, 3)])
        ts = np.array([frame.to_h(build_field(chart, f"T_1{k}").value())
                       for k in (2, 3)])
        assert np.linalg.matrix_rank(xs, tol=1e-8) == 2
        assert np.linalg.matrix_rank(ts, tol=1e-8) == 2


def test_tangency_to_rho_check(sphere3_chart):
    for kind in ("X_12", "T_13", "Upsilon"):
        f = build_field(sphere3_chart, kind)
        assert apply_field(f, sphere3_chart.rho_check).max_abs() < 1e-9


def test_field_values_are_finite_on_thin_points(sphere2):
    # base point with z2 = 0: the pivot guard still produces the field and
    # the dropped-row identities continue to hold by continuity
    chart = make_chart(sphere2, sphere2.point([1.0, 0.0]), order=5)
    for kind in ("X", "T", "Upsilon"):
        _check_action_table(chart, kind)


def test_xxt_witness_surface_independent(charts_n2):
    # XXT(z1 w1) = -2 z1 z2 and TTX(z1 w1) = -2 w1 w2 on every chart
    for chart in charts_n2:
        u = ex.eval_jet(ex.parse("z1*w1"), chart)
        x, t = build_field(chart, "X"), build_field(chart, "T")
        xxt = apply_field(x, apply_field(x, apply_field(t, u))).value
        ttx = apply_field(t, apply_field(t, apply_field(x, u))).value
        z = chart.z0
        w = chart.w0
        assert abs(xxt + 2.0 * z[0] * z[1]) < 1e-8
        assert abs(ttx + 2.0 * w[0] * w[1]) < 1e-8


def test_build_field_validates_kinds(sphere3_chart):
    with pytest.raises(ValueError):
        build_field(sphere3_chart, "X")  # needs indices for n = 3
    with pytest.raises(ValueError):
        build_field(sphere3_chart, "X_11")
    with pytest.raises(ValueError):
        build_field(sphere3_chart, "Ttilde_122")
    with pytest.raises(ValueError):
        build_field(sphere3_chart, "Q_12")


def test_l_fields_require_sphere(ellipsoid3_chart):
    with pytest.raises(ValueError):
        build_field(ellipsoid3_chart, "L_12")
