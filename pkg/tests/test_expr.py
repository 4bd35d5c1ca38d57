import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualcr import Surface, make_chart
from dualcr.errors import (
    DivisionBySingularJet,
    IndexOutOfRange,
    ParseError,
)
from dualcr import expr as ex


def test_parse_product():
    e = ex.parse("z1*w1")
    assert isinstance(e, ex.Mul)
    assert e.left == ex.Sym("z", 1)
    assert e.right == ex.Sym("w", 1)


def test_parse_conj_power_and_literal():
    e = ex.parse("conj(z2)^2 + 0.5*i")
    assert isinstance(e, ex.Add)
    assert isinstance(e.left, ex.Pow) and e.left.exponent == 2
    assert isinstance(e.left.base, ex.Conj)
    assert isinstance(e.right, ex.Mul)
    assert e.right.right == ex.Lit(1j)


def test_parse_error_offset():
    with pytest.raises(ParseError) as info:
        ex.parse("z1*q2")
    assert info.value.offset == 3


def test_parse_unbalanced():
    with pytest.raises(ParseError):
        ex.parse("(z1 + w2")


def test_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        ex.parse("z3", n=2)
    with pytest.raises(IndexOutOfRange):
        ex.parse("z0")
    ex.parse("z3", n=3)


def test_negative_exponent_rejected():
    with pytest.raises(ParseError):
        ex.parse("z1^-2")


def test_whitespace_insensitive():
    assert ex.parse(" z1 * w1 ") == ex.parse("z1*w1")


def test_eval_value():
    e = ex.parse("z1*conj(z1) + i*z2")
    v = ex.eval_value(e, [1 + 2j, 3.0])
    assert abs(v - (5.0 + 3j)) < 1e-14


def test_eval_jet_on_sphere_chart():
    s = Surface.sphere(2)
    p = s.point(np.array([1, 1], dtype=complex) / np.sqrt(2))
    chart = make_chart(s, p, order=4)
    u = ex.eval_jet(ex.parse("z1*w1"), chart)
    assert abs(u.value - 0.5) < 1e-12


def test_eval_jet_pairing_identity(sphere3_chart):
    # sum z_j w_j = 1 along any chart
    u = ex.eval_jet(ex.parse("z1*w1 + z2*w2 + z3*w3"), sphere3_chart)
    assert abs(u.value - 1.0) < 1e-12
    assert (u - 1.0).max_abs() < 1e-10


def test_eval_jet_zero():
    s = Surface.sphere(2)
    chart = make_chart(s, s.point([1.0, 0.0]), order=3)
    u = ex.eval_jet(ex.parse("0"), chart)
    assert u.max_abs() == 0.0


def test_eval_jet_division_floor():
    s = Surface.sphere(2)
    chart = make_chart(s, s.point([1.0, 0.0]), order=3)
    with pytest.raises(DivisionBySingularJet):
        ex.eval_jet(ex.parse("1/z2"), chart)  # z2 = 0 at the base point


def test_pretty_roundtrip_examples():
    for text in [
        "z1*w1",
        "conj(z2)^2 + 0.5*i",
        "-z1^2*(w1 - w2)/2.0",
        "(1.0 - 0.25*i)*z1 + z2^3",
    ]:
        once = ex.pretty(ex.parse(text))
        twice = ex.pretty(ex.parse(once))
        assert once == twice


_atoms = st.sampled_from(["z1", "z2", "w1", "w2", "i", "0.5", "2.0", "conj(z1)"])


@st.composite
def _exprs(draw, depth=0):
    if depth >= 3 or draw(st.booleans()):
        return draw(_atoms)
    op = draw(st.sampled_from(["+", "-", "*"]))
    a = draw(_exprs(depth + 1))
    b = draw(_exprs(depth + 1))
    return f"({a} {op} {b})"


@given(_exprs())
@settings(max_examples=60, deadline=None)
def test_pretty_roundtrip_random(text):
    once = ex.pretty(ex.parse(text, n=2))
    assert ex.pretty(ex.parse(once, n=2)) == once


@given(_exprs(), _exprs())
@settings(max_examples=25, deadline=None)
def test_eval_jet_ring_homomorphism(a, b):
    s = Surface.sphere(2)
    chart = make_chart(s, s.point(np.array([0.6, 0.8], dtype=complex)), order=4)
    ea, eb = ex.parse(a, 2), ex.parse(b, 2)
    lhs = ex.eval_jet(ex.Mul(ea, eb), chart)
    rhs = ex.eval_jet(ea, chart) * ex.eval_jet(eb, chart)
    scale = 1.0 + lhs.max_abs() + rhs.max_abs()
    assert (lhs - rhs).max_abs() <= 1e-11 * scale
    # constant term agrees with pointwise evaluation
    w = np.conj(chart.z0)
    assert abs(lhs.value - ex.eval_value(ex.Mul(ea, eb), chart.z0, w)) <= 1e-11 * scale


def test_wirtinger_derivatives():
    e = ex.parse("z1^2*conj(z2) + z2")
    dz1 = ex.wirtinger(e, 1, bar=False)
    val = ex.eval_value(dz1, [2.0, 1 + 1j])
    assert abs(val - 2 * 2.0 * (1 - 1j)) < 1e-14
    dbar2 = ex.wirtinger(e, 2, bar=True)
    val2 = ex.eval_value(dbar2, [2.0, 1 + 1j])
    assert abs(val2 - 4.0) < 1e-14
    assert ex.eval_value(ex.wirtinger(e, 2, bar=False), [2.0, 1 + 1j]) == 1.0


def test_real_valuedness_check():
    assert ex.is_real_valued(ex.parse("z1*conj(z1) - 1.0"), 1)
    assert not ex.is_real_valued(ex.parse("z1"), 1)


def test_substitute_linear():
    e = ex.parse("z1*w2")
    z_map = [ex.parse("z1 + z2"), ex.parse("z2")]
    w_map = [ex.parse("w1"), ex.parse("2.0*w2")]
    out = ex.substitute(e, z_map, w_map)
    v = ex.eval_value(out, [1.0, 2.0], [5.0, 7.0])
    assert abs(v - (1.0 + 2.0) * 14.0) < 1e-14
