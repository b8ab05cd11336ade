"""Polygon geometry and integration kernels.

Everything here is a pure function of vertex coordinates. Cell integrals use a
fan of triangles around the centroid with a collapsed Gauss rule that is exact
for polynomials of degree 6, so products of two quadratics are integrated
exactly on any simple polygon (signed sub-triangle areas make the fan exact
even when the centroid falls outside a nonconvex cell).
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised for polygons or edges with (numerically) zero measure."""


# 3-point Gauss-Legendre on [0, 1]
_G3_T = 0.5 * (1.0 + np.polynomial.legendre.leggauss(3)[0])
_G3_W = 0.5 * np.polynomial.legendre.leggauss(3)[1]


def _collapsed_triangle_rule(order=4):
    # Duffy map of a tensor Gauss rule onto the reference triangle.
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    u, v, wu, wv = u.ravel(), v.ravel(), wu.ravel(), wv.ravel()
    # barycentric weights of the two non-apex vertices; reference area 1/2
    lam1 = u * (1.0 - v)
    lam2 = u * v
    weights = 2.0 * wu * wv * u  # normalised to sum 1
    return np.stack([1.0 - lam1 - lam2, lam1, lam2], axis=1), weights


TRI_BARY, TRI_WEIGHTS = _collapsed_triangle_rule(4)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        """Integrate a vectorised callable ``f(x, y)``."""
        return float(np.dot(self.weights, f(self.nodes[:, 0], self.nodes[:, 1])))


def polygon_measures(vertices):
    """Area, centroid and diameter of a counterclockwise simple polygon.

    Raises
    ------
    DegenerateGeometryError
        If the signed area is not positive (clockwise or collapsed input).
    """
    xy = np.asarray(vertices, dtype=float)
    if xy.ndim != 2 or xy.shape[0] < 3 or xy.shape[1] != 2:
        raise DegenerateGeometryError("a polygon needs at least 3 vertices in 2-D")
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    diameter = float(np.max(np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)))
    if not area > 1e-14 * diameter**2:
        raise DegenerateGeometryError(f"polygon has non-positive or negligible area {area:.3e}")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy]), diameter


@dataclass
class Polygon:
    """A counterclockwise simple polygon with lazily computed measures."""

    vertices: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.area, self.centroid, self.diameter = polygon_measures(self.vertices)

    @property
    def n(self):
        return len(self.vertices)

    @cached_property
    def edge_lengths(self):
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    @cached_property
    def outward_normals(self):
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        e /= np.linalg.norm(e, axis=1)[:, None]
        return np.stack([e[:, 1], -e[:, 0]], axis=1)

    def cell_rule(self):
        return cell_rule(self.vertices, self.centroid)


def cell_rule(vertices, center=None):
    """Quadrature on a polygon by a fan of triangles around ``center``.

    Exact to degree 6. Weights are signed sub-triangle areas, so they sum to
    the polygon area for any simple polygon and any fan centre.
    """
    xy = np.asarray(vertices, dtype=float)
    if center is None:
        center = polygon_measures(xy)[1]
    a = np.broadcast_to(center, xy.shape)
    b, c = xy, np.roll(xy, -1, axis=0)
    tri_area = 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))
    nodes = (TRI_BARY[None, :, 0, None] * a[:, None, :]
             + TRI_BARY[None, :, 1, None] * b[:, None, :]
             + TRI_BARY[None, :, 2, None] * c[:, None, :])
    weights = tri_area[:, None] * TRI_WEIGHTS[None, :]
    return QuadratureRule(nodes.reshape(-1, 2), weights.ravel())


def edge_rule(a, b):
    """3-point Gauss rule on the segment from ``a`` to ``b`` (exact to degree 5)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length <= 0.0:
        raise DegenerateGeometryError("zero-length edge")
    nodes = a[None, :] + _G3_T[:, None] * (b - a)[None, :]
    return QuadratureRule(nodes, length * _G3_W)


def monomial_exponents(max_degree):
    """Exponent pairs (a, b) ordered by total degree, then by decreasing a."""
    return [(d - j, j) for d in range(max_degree + 1) for j in range(d + 1)]


@dataclass(frozen=True)
class ScaledMonomialBasis:
    """Monomials ((x - xc)/h)^a ((y - yc)/h)^b with a + b <= degree."""

    centroid: np.ndarray
    diameter: float
    degree: int = 2

    @property
    def exponents(self):
        return monomial_exponents(self.degree)

    def scaled(self, points):
        p = np.asarray(points, dtype=float)
        return (p - self.centroid) / self.diameter

    def evaluate(self, points):
        """Values at ``points`` (m, 2); returns shape (m, n_monomials)."""
        s = self.scaled(points)
        return np.stack([s[:, 0] ** a * s[:, 1] ** b for a, b in self.exponents], axis=1)

    @classmethod
    def for_polygon(cls, poly, degree=2):
        return cls(poly.centroid, poly.diameter, degree)


def monomial_moments(poly, basis=None, max_degree=2):
    """Integrals of every scaled monomial of total degree <= ``max_degree``.

    Returns a dict keyed by exponent pair.
    """
    if max_degree > 4:
        raise ValueError("moments are exact only up to degree 4")
    if not isinstance(poly, Polygon):
        poly = Polygon(poly)
    if basis is None:
        basis = ScaledMonomialBasis.for_polygon(poly, max_degree)
    rule = cell_rule(poly.vertices, poly.centroid)
    s = basis.scaled(rule.nodes)
    return {(a, b): float(np.dot(rule.weights, s[:, 0] ** a * s[:, 1] ** b))
            for a, b in monomial_exponents(max_degree)}


# ---------------------------------------------------------------------------
# batched kernels over cells sharing a vertex count, used by assembly


def batch_measures(X):
    """Area (B,), centroid (B, 2), diameter (B,) for stacked polygons X (B, n, 2)."""
    x, y = X[..., 0], X[..., 1]
    xn, yn = np.roll(x, -1, axis=1), np.roll(y, -1, axis=1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum(axis=1)
    diam = np.sqrt(((X[:, :, None, :] - X[:, None, :, :]) ** 2).sum(-1).max(axis=(1, 2)))
    bad = ~(area > 1e-14 * diam**2)
    if np.any(bad):
        raise DegenerateGeometryError(
            f"{int(bad.sum())} polygon(s) with non-positive or negligible area")
    cx = ((x + xn) * cross).sum(axis=1) / (6.0 * area)
    cy = ((y + yn) * cross).sum(axis=1) / (6.0 * area)
    return area, np.stack([cx, cy], axis=1), diam


def batch_scaled_moments(X, centroid, diam, max_degree=2):
    """Moments of scaled monomials for stacked polygons; shape (B, n_monomials)."""
    S = (X - centroid[:, None, :]) / diam[:, None, None]
    # fan around the centroid, which is the origin in scaled coordinates
    b, c = S, np.roll(S, -1, axis=1)
    tri = 0.5 * (b[..., 0] * c[..., 1] - c[..., 0] * b[..., 1])
    pts = (TRI_BARY[None, None, :, 1, None] * b[:, :, None, :]
           + TRI_BARY[None, None, :, 2, None] * c[:, :, None, :])
    w = tri[:, :, None] * TRI_WEIGHTS[None, None, :]
    scale = diam**2
    out = [np.einsum("bij,bij->b", w, pts[..., 0] ** a * pts[..., 1] ** q) * scale
           for a, q in monomial_exponents(max_degree)]
    return np.stack(out, axis=1)
