"""Residual a posteriori indicators for a computed eigenpair.

For a cell K the squared indicator is

    eta_K^2 = Theta_K^2 + R_K^2 + sum_{l in E_K} h_K |l| |J_l|^2

with Theta_K^2 the stabilisation energy of u_h - Pi u_h, R_K^2 the scaled
interior residual and J_l half the jump of the discrete stress across an
interior edge. Everything is evaluated from projector coefficients, so the
indicators are exact for the discrete quantities they describe.
"""

from dataclasses import dataclass

import numpy as np

from .vem_local import NPOLY, stress_gradients

# Laplacian and pressure-gradient coefficients vanish identically for linear
# velocities and constant pressures; kept as explicit maps so that the interior
# residual is written in full.
_LAPLACIAN_P1 = np.zeros((NPOLY, NPOLY))


@dataclass
class IndicatorField:
    """Per-cell squared indicator components and their totals."""

    theta2: np.ndarray
    R2: np.ndarray
    J2: np.ndarray

    @property
    def eta2_cells(self):
        return self.theta2 + self.R2 + self.J2

    @property
    def eta_cells(self):
        return np.sqrt(self.eta2_cells)

    @property
    def eta2(self):
        return float(self.eta2_cells.sum())

    @property
    def eta(self):
        return float(np.sqrt(self.eta2))

    def totals(self):
        """Global sums (theta2, R2, J2, eta2)."""
        return (float(self.theta2.sum()), float(self.R2.sum()), float(self.J2.sum()), self.eta2)


def _cell_slices(system, u):
    for grp in system.groups:
        yield grp, u[grp.dofs]


def theta(system, u):
    """Theta_K^2 = alpha nu |(I - D Pi) u_K|^2 for every cell."""
    cfg = system.config
    out = np.zeros(system.dofmap.n_cells)
    for grp, uK in _cell_slices(system, u):
        r = uK - np.einsum("bij,bj->bi", grp.D, np.einsum("bij,bj->bi", grp.Pi, uK))
        out[grp.cells] = cfg.alpha * cfg.nu * np.sum(r * r, axis=1)
    return out


def interior_residual(system, lam, u, p):
    """R_K^2 = h_K^2 ||lam Pi0 u + nu Lap(Pi u) - grad p||^2_{0,K}.

    With linear projections and piecewise constant pressure only the first
    term survives; the other two are formed and checked to be zero.
    """
    nu = system.config.nu
    out = np.zeros(system.dofmap.n_cells)
    for grp, uK in _cell_slices(system, u):
        pi0 = np.einsum("bij,bj->bi", grp.Pi0, uK)
        lap = np.einsum("ij,bj->bi", _LAPLACIAN_P1, np.einsum("bij,bj->bi", grp.Pi, uK))
        grad_p = np.zeros_like(pi0)  # p is constant on each cell
        assert not lap.any() and not grad_p.any()
        ups = lam * pi0 + nu * lap - grad_p
        out[grp.cells] = grp.diameter**2 * np.einsum("bi,bij,bj->b", ups, grp.M, ups)
    return out


def cell_stress(system, u, p, jump_nu=True):
    """Discrete stress nu grad(Pi u) - p I per cell, shape (n_cells, 2, 2)."""
    nu = system.config.nu if jump_nu else 1.0
    sig = np.zeros((system.dofmap.n_cells, 2, 2))
    for grp, uK in _cell_slices(system, u):
        g = stress_gradients(np.einsum("bij,bj->bi", grp.Pi, uK), grp.diameter)
        sig[grp.cells] = nu * g
    sig[:, 0, 0] -= p
    sig[:, 1, 1] -= p
    return sig


def edge_jumps(mesh, system, u, p, jump_nu=True):
    """J_l = (sigma_K - sigma_K') n / 2 on interior edges, zero on the boundary.

    ``n`` is the stored edge normal, outward for ``edge_cells[:, 0]``.
    Returns an array of shape (n_edges, 2).
    """
    sig = cell_stress(system, u, p, jump_nu)
    J = np.zeros((mesh.n_edges, 2))
    inner = mesh.edge_cells[:, 1] >= 0
    k0, k1 = mesh.edge_cells[inner, 0], mesh.edge_cells[inner, 1]
    dsig = sig[k0] - sig[k1]
    J[inner] = 0.5 * np.einsum("eij,ej->ei", dsig, mesh.edge_normals[inner])
    return J


def global_estimate(mesh, system, solution, index=0, jump_nu=True):
    """Indicator field of eigenpair ``index`` (the lowest by default)."""
    lam = float(solution.eigenvalues[index])
    u = solution.u[:, index]
    p = solution.p[:, index]
    th = theta(system, u)
    R2 = interior_residual(system, lam, u, p)
    J = edge_jumps(mesh, system, u, p, jump_nu)
    jn = mesh.edge_lengths * np.sum(J * J, axis=1)  # ||J_l||^2 over the edge
    J2 = np.zeros(mesh.n_cells)
    inner = mesh.edge_cells[:, 1] >= 0
    h = mesh.diameters
    for side in (0, 1):
        k = mesh.edge_cells[inner, side]
        np.add.at(J2, k, h[k] * jn[inner])
    return IndicatorField(th, R2, J2)


def effectivity(lam_ref, lam_h, eta2):
    """err / eta^2 with err = |lam_ref - lam_h| / lam_ref.

    A vanishing estimator with nonzero error gives ``inf``.
    """
    if not lam_ref > 0:
        raise ValueError("reference eigenvalue must be positive")
    err = abs(lam_ref - lam_h) / lam_ref
    if eta2 == 0.0:
        return 0.0 if err == 0.0 else np.inf
    return err / eta2
