import numpy as np
import pytest

from dualcr import Surface, make_chart, project_to_surface, sample_points
from dualcr.errors import NotTotallyReal, ResidualTooLarge
from dualcr.incidence import (
    check_section4,
    gamma_tangent_basis,
    holomorphic_bracket_value,
    holomorphic_field_value,
    incidence_residual,
    lift,
    tangential_part,
    total_reality_angle,
)


def test_lift_examples(sphere2, ellipsoid2):
    a = lift(sphere2, sphere2.point([1.0, 0.0]))
    assert np.allclose(a.zw, [1, 0, 1, 0], atol=1e-13)
    b = lift(sphere2, sphere2.point([0.6, 0.8]))
    assert np.allclose(b.zw, [0.6, 0.8, 0.6, 0.8], atol=1e-12)
    assert b.residual < 1e-12
    c = lift(ellipsoid2, ellipsoid2.point([1 / np.sqrt(2), 0.0]))
    assert np.allclose(c.zw, [1 / np.sqrt(2), 0, np.sqrt(2), 0], atol=1e-12)


def test_lift_constraint(sphere2):
    for p in sample_points(sphere2, 10, seed=20):
        assert lift(sphere2, p).residual < 1e-10


def test_fields_tangent_to_quadric():
    # SX, ST, SY annihilate z1 w1 + z2 w2 - 1 at random quadric points
    rng = np.random.default_rng(2)
    for _ in range(10):
        z1, z2, w1 = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        w2 = (1.0 - z1 * w1) / z2
        q = np.array([z1, z2, w1, w2])
        assert incidence_residual(q) < 1e-10
        grad = np.array([q[2], q[3], q[0], q[1]])  # d(z.w) in (z1,z2,w1,w2)
        for name in ("X", "T", "Y"):
            v = holomorphic_field_value(name, q)
            assert abs(np.dot(grad, v)) < 1e-12


def test_holomorphic_bracket_table():
    rng = np.random.default_rng(3)
    for _ in range(10):
        q = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert np.max(np.abs(
            holomorphic_bracket_value("X", "T", q)
            - holomorphic_field_value("Y", q))) < 1e-12
        assert np.max(np.abs(
            holomorphic_bracket_value("Y", "X", q)
            + 2.0 * holomorphic_field_value("X", q))) < 1e-12
        assert np.max(np.abs(
            holomorphic_bracket_value("Y", "T", q)
            - 2.0 * holomorphic_field_value("T", q))) < 1e-12


def test_tangential_part_basics(sphere2):
    p = project_to_surface(sphere2, np.array([0.5 + 0.2j, 0.8 - 0.1j]))
    chart = make_chart(sphere2, p, order=3)
    base = lift(sphere2, p)
    basis = gamma_tangent_basis(chart)
    tangent4 = basis[0::2, 1] + 1j * basis[1::2, 1]
    out = tangential_part(base, basis, tangent4)
    assert np.max(np.abs(out - tangent4)) < 1e-10
    out_j = tangential_part(base, basis, 1j * tangent4)
    assert np.max(np.abs(out_j)) < 1e-10


def test_tangential_part_rejects_rank_deficiency(sphere2):
    p = sphere2.point([0.6, 0.8])
    chart = make_chart(sphere2, p, order=3)
    base = lift(sphere2, p)
    basis = gamma_tangent_basis(chart)
    bad = basis.copy()
    bad[:, 2] = bad[:, 0]
    with pytest.raises(ValueError):
        tangential_part(base, bad, np.ones(4, dtype=complex))


def test_tangential_part_rejects_nontangent_vector(sphere2):
    p = sphere2.point([0.6, 0.8])
    chart = make_chart(sphere2, p, order=3)
    base = lift(sphere2, p)
    basis = gamma_tangent_basis(chart)
    # a holomorphic vector transverse to the quadric
    with pytest.raises(ResidualTooLarge):
        tangential_part(base, basis, np.array([1.0, 0, 0, 0]), holomorphic=True)


def test_total_reality(sphere2, ellipsoid2):
    for surface in (sphere2, ellipsoid2):
        for p in sample_points(surface, 10, seed=21):
            chart = make_chart(surface, p, order=2)
            angle = total_reality_angle(gamma_tangent_basis(chart))
            assert angle > 1e-6


def test_section4_residuals(sphere2, ellipsoid2):
    for surface in (sphere2, ellipsoid2):
        for p in sample_points(surface, 8, seed=22):
            rep = check_section4(surface, p)
            assert rep.max_residual < 1e-8, (surface.spec, rep)
            assert rep.total_reality_angle > 1e-6


def test_section4_requires_n2(sphere3):
    with pytest.raises(ValueError):
        lift(sphere3, sphere3.point([1.0, 0, 0]))
