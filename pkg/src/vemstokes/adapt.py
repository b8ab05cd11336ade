"""Marking, the adaptive solve-estimate-mark-refine loop and rate fitting."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .estimator import effectivity, global_estimate
from .polymesh import MeshError, refine
from .system import Config, assemble, solve_eigs

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("step", "cells", "dofs", "lambda1", "eta2", "theta2", "R2", "J2", "err", "eff")


def mark(eta, theta=0.5):
    """Indices of the cells with eta_K >= theta * max eta.

    An all-zero field marks nothing, which the adaptive loop reads as
    convergence.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.size == 0:
        raise ValueError("empty indicator field")
    top = eta.max()
    if top <= 0.0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(eta >= theta * top)


@dataclass
class AdaptHistory:
    """One row per adaptive step, with the columns of ``HISTORY_COLUMNS``."""

    rows: list = field(default_factory=list)
    aborted: str = ""
    mesh: object = None
    solution: object = None

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def append(self, **row):
        self.rows.append({c: row[c] for c in HISTORY_COLUMNS})


def total_dofs(mesh):
    """Velocity DOFs (boundary included) plus one pressure per cell."""
    return 2 * mesh.n_vertices + mesh.n_edges + mesh.n_cells


def adaptive_loop(mesh, config=Config(), steps=12, theta=0.5, lam_ref=None,
                  dof_budget=300_000, jump_nu=True, callback=None):
    """Run solve -> estimate -> mark -> refine for at most ``steps`` solves.

    The loop stops early when marking returns nothing or when the next mesh
    would exceed ``dof_budget``. A refinement failure ends the run with the
    partial history and the reason in ``history.aborted``.

    ``callback(step, mesh, system, solution, indicators)`` is invoked after
    each estimate, e.g. to write fields to disk.
    """
    hist = AdaptHistory()
    for step in range(steps):
        _, system = assemble(mesh, config)
        sol = solve_eigs(system, k=1)
        ind = global_estimate(mesh, system, sol, 0, jump_nu)
        lam = float(sol.eigenvalues[0])
        th2, r2, j2, eta2 = ind.totals()
        if lam_ref is None:
            err = eff = np.nan
        else:
            err = abs(lam_ref - lam) / lam_ref
            eff = effectivity(lam_ref, lam, eta2)
        hist.append(step=step, cells=mesh.n_cells, dofs=total_dofs(mesh), lambda1=lam,
                    eta2=eta2, theta2=th2, R2=r2, J2=j2, err=err, eff=eff)
        hist.mesh, hist.solution = mesh, sol
        log.info("step %d: %d cells, lambda1 = %.10g, eta2 = %.4e", step, mesh.n_cells, lam, eta2)
        if callback is not None:
            callback(step, mesh, system, sol, ind)
        if step == steps - 1:
            break
        marked = mark(ind.eta_cells, theta)
        if marked.size == 0:
            break
        try:
            nxt = refine(mesh, marked)
        except MeshError as exc:
            hist.aborted = str(exc)
            log.warning("refinement failed at step %d: %s", step, exc)
            break
        if total_dofs(nxt) > dof_budget:
            break
        mesh = nxt
    return hist


@dataclass
class ConvergenceFit:
    """Fitted model lambda_i = extrapolated + C * x_i^rate.

    For ``kind == "h"`` the rate is the positive order in the mesh size. For
    ``kind == "N"`` the rate is the (negative) slope in the cell count. With a
    reference value the rate is the log-log slope of |lambda - ref| / ref.
    """

    kind: str
    x: np.ndarray
    values: np.ndarray
    rate: float
    extrapolated: float
    constant: float
    residual: float
    low_confidence: bool = False


def _linear_given_rate(x, y, t):
    A = np.column_stack([np.ones_like(x), x**t])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef, y - A @ coef


def fit_order(x, values, kind="h", reference=None):
    """Fit a convergence rate and the limit value to a refinement series.

    Parameters
    ----------
    x : array_like
        Mesh sizes (``kind="h"``) or cell counts (``kind="N"``); at least 3
        distinct values.
    values : array_like
        Computed eigenvalues on those meshes.
    reference : float, optional
        If given, only the slope of log(|values - reference| / reference)
        against log(x) is fitted and the limit is taken as the reference.

    Returns
    -------
    ConvergenceFit
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("need at least 3 (x, value) pairs")
    if kind not in ("h", "N"):
        raise ValueError(f"unknown abscissa kind {kind!r}")
    if np.any(x <= 0) or len(np.unique(x)) != len(x):
        raise ValueError("abscissae must be positive and distinct")
    order = np.argsort(x)
    x, y = x[order], y[order]

    if reference is not None:
        err = np.abs(y - reference) / abs(reference)
        if np.any(err == 0):
            raise ValueError("a value coincides with the reference")
        A = np.column_stack([np.ones_like(x), np.log(x)])
        coef, *_ = np.linalg.lstsq(A, np.log(err), rcond=None)
        res = np.log(err) - A @ coef
        mono = np.all(np.diff(err) < 0) if kind == "N" else np.all(np.diff(err) > 0)
        return ConvergenceFit(kind, x, y, float(coef[1]), float(reference),
                              float(np.exp(coef[0])), float(np.linalg.norm(res)), not mono)

    # model in s = x (kind h) or s = 1/x (kind N) with a positive exponent
    s = x if kind == "h" else 1.0 / x
    s = s / s.max()  # conditioning; C is rescaled below

    def vp(t):
        return float(np.sum(_linear_given_rate(s, y, t)[1] ** 2))

    best = min((vp(t), t) for t in np.linspace(0.1, 8.0, 80))[1]
    t0 = minimize_scalar(vp, bounds=(max(0.05, best - 0.2), best + 0.2), method="bounded",
                         options={"xatol": 1e-12}).x
    (l0, c0), _ = _linear_given_rate(s, y, t0)

    def model_res(q):
        return q[0] + q[1] * s ** q[2] - y

    sol = least_squares(model_res, [l0, c0, t0], xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        method="lm")
    lam_inf, C, t = sol.x
    res = float(np.linalg.norm(model_res(sol.x)))
    diffs = np.diff(y)
    mono = np.all(diffs > 0) or np.all(diffs < 0)
    scale = (x.max() if kind == "h" else 1.0 / x.min())
    C_phys = C / scale**t
    rate = t if kind == "h" else -t
    return ConvergenceFit(kind, x, y, float(rate), float(lam_inf), float(C_phys), res, not mono)
