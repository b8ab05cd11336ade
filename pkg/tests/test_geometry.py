import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from vemstokes.geometry import (
    DegenerateGeometryError,
    Polygon,
    batch_measures,
    batch_scaled_moments,
    cell_rule,
    edge_rule,
    monomial_moments,
    polygon_measures,
)


def green_moments(P):
    """Closed-form integrals of 1, x, y, x^2, xy, y^2 over a polygon (Green's theorem)."""
    x, y = P[:, 0], P[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    c = x * yn - xn * y
    return np.array([
        c.sum() / 2,
        ((x + xn) * c).sum() / 6,
        ((y + yn) * c).sum() / 6,
        ((x * x + x * xn + xn * xn) * c).sum() / 12,
        ((x * yn + 2 * x * y + 2 * xn * yn + xn * y) * c).sum() / 24,
        ((y * y + y * yn + yn * yn) * c).sum() / 12,
    ])


def test_measures_match_shapely(random_cells):
    for _, P in random_cells:
        area, centroid, diam = polygon_measures(P)
        poly = shapely.Polygon(P)
        assert area == pytest.approx(poly.area, rel=1e-13)
        np.testing.assert_allclose(centroid, [poly.centroid.x, poly.centroid.y], atol=1e-13)
        assert diam > 0


def test_batch_moments_match_green(random_cells):
    for _, P in random_cells:
        X = P[None]
        area, c, h = batch_measures(X)
        mom = batch_scaled_moments(X, c, h)[0]
        S = (P - c[0]) / h[0]
        # moments are of scaled monomials times the physical measure
        np.testing.assert_allclose(mom, green_moments(S) * h[0] ** 2, atol=1e-13 * area[0])


def test_cell_rule_is_exact_to_degree_six(nonconvex_cell):
    rule = cell_rule(nonconvex_cell, center=np.array([0.9, 0.9]))  # fan centre off-cell
    # x^6 over the polygon: compare with a fine fan rule around a kernel point
    ref = cell_rule(nonconvex_cell, center=np.array([0.5, 0.1]))
    f = lambda x, y: x**6 - 3 * x**2 * y**3 + y**5
    assert rule.integrate(f) == pytest.approx(ref.integrate(f), rel=1e-13)
    assert rule.weights.sum() == pytest.approx(polygon_measures(nonconvex_cell)[0], rel=1e-14)


def test_edge_rule_degree_five():
    rule = edge_rule([0.0, 0.0], [2.0, 0.0])
    assert rule.integrate(lambda x, y: x**5) == pytest.approx(2.0**6 / 6, rel=1e-14)


def test_monomial_moments_dict(pentagon):
    poly = Polygon(pentagon)
    mom = monomial_moments(poly)
    assert mom[(0, 0)] == pytest.approx(poly.area, rel=1e-14)
    assert abs(mom[(1, 0)]) < 1e-14 and abs(mom[(0, 1)]) < 1e-14


def test_clockwise_polygon_is_rejected(pentagon):
    with pytest.raises(DegenerateGeometryError):
        polygon_measures(pentagon[::-1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_moments_invariant_under_cyclic_reindexing(seed, shift):
    rng = np.random.default_rng(seed)
    n = 6
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    P = np.column_stack([np.cos(ang), np.sin(ang)]) * rng.uniform(0.5, 2.0, (n, 1))
    try:
        a = batch_scaled_moments(P[None], *[v for v in batch_measures(P[None])][1:])
    except DegenerateGeometryError:
        return
    Q = np.roll(P, shift, axis=0)
    b = batch_scaled_moments(Q[None], *[v for v in batch_measures(Q[None])][1:])
    np.testing.assert_allclose(a, b, atol=1e-13)
