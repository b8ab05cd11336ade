import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vemstokes.estimator import (
    cell_stress,
    edge_jumps,
    effectivity,
    global_estimate,
    interior_residual,
    theta,
)
from vemstokes.polymesh import generate
from vemstokes.system import Config, EigenSolution, assemble, solve_eigs

from test_geometry import green_moments


def linear_field_dofs(mesh, F, c):
    """Full velocity DOF vector of u(x) = c + F x."""
    u_v = mesh.vertices @ F.T + c
    u_m = mesh.edge_midpoints @ F.T + c
    out = np.empty(2 * mesh.n_vertices + mesh.n_edges)
    out[0:2 * mesh.n_vertices:2] = u_v[:, 0]
    out[1:2 * mesh.n_vertices:2] = u_v[:, 1]
    out[2 * mesh.n_vertices:] = np.sum(u_m * mesh.edge_normals, axis=1)
    return out


@pytest.fixture(scope="module")
def voronoi():
    mesh = generate("square", "T2", 6, seed=4)
    return mesh, assemble(mesh)[1]


def test_linear_field_has_no_stabilisation_or_jumps(voronoi):
    mesh, system = voronoi
    F = np.array([[1.0, 2.0], [0.5, -1.0]])
    c = np.array([0.3, -0.2])
    u = linear_field_dofs(mesh, F, c)
    p = np.full(mesh.n_cells, 0.7)
    assert np.abs(theta(system, u)).max() < 1e-24
    np.testing.assert_allclose(edge_jumps(mesh, system, u, p), 0.0, atol=1e-12)
    sig = cell_stress(system, u, p)
    np.testing.assert_allclose(sig, np.broadcast_to(F - 0.7 * np.eye(2), sig.shape), atol=1e-12)


def test_interior_residual_closed_form(voronoi):
    mesh, system = voronoi
    F = np.array([[1.0, 2.0], [0.5, -1.0]])
    c = np.array([0.3, -0.2])
    u = linear_field_dofs(mesh, F, c)
    lam = 3.0
    R2 = interior_residual(system, lam, u, np.zeros(mesh.n_cells))
    # h^2 lam^2 int |c + F x|^2, integrated with closed-form polygon moments
    Q = F.T @ F
    for k in range(mesh.n_cells):
        m = green_moments(mesh.cell_vertices(k))
        one, x, y, xx, xy, yy = m
        val = (c @ c * one + 2 * (F.T @ c) @ [x, y]
               + Q[0, 0] * xx + 2 * Q[0, 1] * xy + Q[1, 1] * yy)
        assert R2[k] == pytest.approx(mesh.diameters[k] ** 2 * lam**2 * val, rel=1e-11)


def test_pressure_jumps_by_hand(voronoi):
    mesh, system = voronoi
    rng = np.random.default_rng(0)
    p = rng.normal(size=mesh.n_cells)
    u = np.zeros(2 * mesh.n_vertices + mesh.n_edges)
    J = edge_jumps(mesh, system, u, p)
    ind = global_estimate(mesh, system, EigenSolution(np.array([1.0]), u[:, None], p[:, None],
                                                      np.zeros(1)))
    expect = np.zeros(mesh.n_cells)
    for e in range(mesh.n_edges):
        k0, k1 = mesh.edge_cells[e]
        if k1 < 0:
            np.testing.assert_array_equal(J[e], 0.0)
            continue
        jump = 0.5 * (p[k1] - p[k0]) * mesh.edge_normals[e]
        np.testing.assert_allclose(J[e], jump, atol=1e-14)
        for k in (k0, k1):
            expect[k] += mesh.diameters[k] * mesh.edge_lengths[e] * jump @ jump
    np.testing.assert_allclose(ind.J2, expect, rtol=1e-13)


def test_jump_nu_flag():
    mesh = generate("square", "T5", 4)
    system = assemble(mesh, Config(nu=2.0))[1]
    rng = np.random.default_rng(1)
    u = rng.normal(size=2 * mesh.n_vertices + mesh.n_edges)
    p = rng.normal(size=mesh.n_cells)
    on = cell_stress(system, u, p, jump_nu=True)
    off = cell_stress(system, u, p, jump_nu=False)
    pI = p[:, None, None] * np.eye(2)
    np.testing.assert_allclose(on + pI, 2.0 * (off + pI), rtol=1e-13)


@pytest.fixture(scope="module")
def lshape_pair():
    mesh = generate("lshape", "T1", 4)
    system = assemble(mesh)[1]
    return mesh, system, solve_eigs(system, 1)


@settings(max_examples=20, deadline=None)
@given(st.integers(-6, 6))
def test_eta_is_exactly_quadratic_in_the_eigenvector(lshape_pair, e):
    mesh, system, sol = lshape_pair
    s = 2.0**e
    base = global_estimate(mesh, system, sol)
    scaled = EigenSolution(sol.eigenvalues, s * sol.u, s * sol.p, sol.residuals)
    ind = global_estimate(mesh, system, scaled)
    np.testing.assert_array_equal(ind.eta2_cells, s * s * base.eta2_cells)


def test_indicator_totals(lshape_pair):
    mesh, system, sol = lshape_pair
    ind = global_estimate(mesh, system, sol)
    th, r, j, eta2 = ind.totals()
    assert eta2 == pytest.approx(th + r + j, rel=1e-14)
    assert ind.eta == pytest.approx(np.sqrt(eta2))
    # the re-entrant corner carries the largest indicator
    top = np.argmax(ind.eta_cells)
    assert np.linalg.norm(mesh.centroids[top]) < 0.5


def test_effectivity():
    assert effectivity(32.0, 31.0, 2.0) == pytest.approx((1 / 32) / 2)
    assert effectivity(1.0, 0.5, 0.0) == np.inf
    with pytest.raises(ValueError):
        effectivity(0.0, 1.0, 1.0)
