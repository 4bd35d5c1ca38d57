import numpy as np
import pytest

from dualcr import Surface, make_chart, project_to_surface, sample_points


def jet_gap(a, b) -> float:
    """Max coefficient difference after truncating to the common order."""
    order = min(a.order, b.order)
    return (a.trunc(order) - b.trunc(order)).max_abs()


def field_gap(f, g, factor=1.0) -> float:
    order = min(f.order, g.order)
    return max(
        (a.trunc(order) - factor * b.trunc(order)).max_abs()
        for a, b in zip(f.coeffs, g.coeffs)
    )


@pytest.fixture(scope="session")
def sphere2():
    return Surface.sphere(2)


@pytest.fixture(scope="session")
def sphere3():
    return Surface.sphere(3)


@pytest.fixture(scope="session")
def ellipsoid2():
    return Surface.ellipsoid([2, 1])


@pytest.fixture(scope="session")
def ellipsoid3():
    return Surface.ellipsoid([3, 1, 0.5])


@pytest.fixture(scope="session")
def sphere2_chart(sphere2):
    p = sphere2.point(np.array([1, 1], dtype=complex) / np.sqrt(2))
    return make_chart(sphere2, p, order=5)


@pytest.fixture(scope="session")
def sphere3_chart(sphere3):
    p = sphere3.point(np.ones(3, dtype=complex) / np.sqrt(3))
    return make_chart(sphere3, p, order=5)


@pytest.fixture(scope="session")
def generic_chart2(sphere2):
    p = project_to_surface(sphere2, np.array([0.4 + 0.3j, 0.7 - 0.35j]))
    return make_chart(sphere2, p, order=5)


@pytest.fixture(scope="session")
def ellipsoid2_chart(ellipsoid2):
    p = project_to_surface(ellipsoid2, np.array([0.5 + 0.2j, 0.6 - 0.4j]))
    return make_chart(ellipsoid2, p, order=5)


@pytest.fixture(scope="session")
def ellipsoid3_chart(ellipsoid3):
    p = project_to_surface(ellipsoid3, np.array([0.4 + 0.2j, 0.5 - 0.3j, 0.8 + 0.5j]))
    return make_chart(ellipsoid3, p, order=5)


@pytest.fixture(scope="session")
def charts_n2(sphere2, ellipsoid2):
    out = []
    for surface in (sphere2, ellipsoid2):
        for p in sample_points(surface, 6, seed=101):
            out.append(make_chart(surface, p, order=5))
    return out


@pytest.fixture(scope="session")
def charts_n3(sphere3, ellipsoid3):
    out = []
    for surface in (sphere3, ellipsoid3):
        for p in sample_points(surface, 4, seed=202):
            out.append(make_chart(surface, p, order=5))
    return out
