"""Reproduction runs for the numerical experiments.

Each test writes table-shaped CSV files (and VTK fields for the adaptive
test) into an output directory together with ``run.json``, which records
the experiment description, its hash and wall times.
"""

import json
import logging
import time
import traceback
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .adapt import HISTORY_COLUMNS, adaptive_loop, fit_order, total_dofs
from .io import config_hash, eigenfunction_fields, write_csv, write_vtk
from .polymesh import generate
from .system import Config, assemble, solve_eigs

log = logging.getLogger(__name__)

TESTS = ("test1", "test2", "test3-sweep", "test3-order", "test4")
LSHAPE_LAMBDA1 = 32.1321

_DEFAULTS = {
    "test1": dict(families=("T1", "T2", "T3", "T4", "T5"), N=(16, 32, 64), alpha=(1.0,),
                  bc="clamped", k=4),
    "test2": dict(families=("T2",), N=(16, 32, 64), alpha=(1.0,), bc="clamped", k=5),
    "test3-sweep": dict(families=("T1", "T2", "T5"), N=(11,), alpha=(0.1, 0.2, 1.0, 5.0, 10.0),
                        bc="mixed", k=10),
    "test3-order": dict(families=("T1",), N=(32, 64, 128),
                        alpha=(1 / 16, 1 / 4, 1.0, 4.0, 16.0), bc="mixed", k=5),
    "test4": dict(families=("T1", "T2"), N=(21,), alpha=(1.0,), bc="clamped", k=1),
}

# initial meshes per unit length for the uniform L-shape sequence
LSHAPE_UNIFORM = (10, 20, 40, 80)


@dataclass
class ExperimentSpec:
    test: str
    families: tuple = ()
    N: tuple = ()
    alpha: tuple = ()
    bc: str = ""
    k: int = 0
    seed: int = 42
    nu: float = 1.0
    steps: int = 12
    dof_budget: int = 300_000
    uniform: tuple = LSHAPE_UNIFORM
    jump_nu: bool = True
    out: str = "out"

    def __post_init__(self):
        if self.test not in TESTS:
            raise ValueError(f"unknown test {self.test!r}; choose from {TESTS}")
        d = _DEFAULTS[self.test]
        self.families = tuple(f.upper() for f in (self.families or d["families"]))
        self.N = tuple(int(n) for n in (self.N or d["N"]))
        self.alpha = tuple(float(a) for a in (self.alpha or d["alpha"]))
        self.bc = self.bc or d["bc"]
        self.k = int(self.k or d["k"])
        self.uniform = tuple(int(n) for n in self.uniform)
        if not self.nu > 0 or min(self.alpha) <= 0 or self.k < 1:
            raise ValueError("nu and alpha must be positive and k >= 1")

    def describe(self):
        d = asdict(self)
        d.pop("out")
        return d

    @property
    def hash(self):
        return config_hash(self.describe())


def eigen_series(domain, family, Ns, config, k, seed):
    """Lowest ``k`` eigenvalues on a sequence of meshes, shape (len(Ns), k)."""
    out = []
    for n in Ns:
        mesh = generate(domain, family, n, seed=seed)
        _, system = assemble(mesh, config)
        out.append(solve_eigs(system, k).eigenvalues)
        log.info("%s %s N=%d: %s", domain, family, n, np.array2string(out[-1], precision=6))
    return np.array(out)


def series_rows(label, Ns, lam, tag):
    """Table rows (one per eigenvalue) with the order and the extrapolated limit."""
    rows = []
    h = 1.0 / np.asarray(Ns, float)
    for i in range(lam.shape[1]):
        row = dict(label, eig=i + 1)
        for n, v in zip(Ns, lam[:, i]):
            row[f"N{n}"] = v
        if len(Ns) >= 3:
            fit = fit_order(h, lam[:, i], kind="h")
            row["order"], row["extr"] = fit.rate, fit.extrapolated
        else:
            row["order"] = row["extr"] = np.nan
        row["config"] = tag
        rows.append(row)
    return rows


def _series_columns(first, Ns):
    return [*first, "eig", *[f"N{n}" for n in Ns], "order", "extr", "config"]


def run_test1(spec, out):
    cfg = Config(nu=spec.nu, alpha=spec.alpha[0], bc="clamped")
    rows = []
    for fam in spec.families:
        lam = eigen_series("square", fam, spec.N, cfg, spec.k, spec.seed)
        rows += series_rows({"family": fam}, spec.N, lam, spec.hash)
    path = out / "test1.csv"
    write_csv(path, _series_columns(["family"], spec.N), rows)
    return [path]


def run_test2(spec, out):
    cfg = Config(nu=spec.nu, alpha=spec.alpha[0], bc="clamped")
    rows = []
    for fam in spec.families:
        lam = eigen_series("disk", fam, spec.N, cfg, spec.k, spec.seed)
        rows += series_rows({"family": fam}, spec.N, lam, spec.hash)
    path = out / "test2.csv"
    write_csv(path, _series_columns(["family"], spec.N), rows)
    return [path]


def sweep_spectra(family, N, alphas, k, seed, nu=1.0):
    """Lowest ``k`` mixed-bc eigenvalues on the unit square for each alpha."""
    mesh = generate("unit_square", family, N, seed=seed)
    spectra = {}
    for a in alphas:
        _, system = assemble(mesh, Config(nu=nu, alpha=a, bc="mixed"))
        spectra[a] = solve_eigs(system, k).eigenvalues
    return spectra


def suspect_flags(values, reference, rel=0.02):
    """True for values with no match within ``rel`` in the reference spectrum."""
    ref = np.asarray(reference)
    return np.array([np.min(np.abs(ref - v)) > rel * v for v in values])


def run_test3_sweep(spec, out):
    rows = []
    alphas = tuple(spec.alpha)
    for fam in spec.families:
        spectra = sweep_spectra(fam, spec.N[0], alphas, spec.k, spec.seed, spec.nu)
        # reference spectrum, with headroom so high modes still find a partner
        ref = sweep_spectra(fam, spec.N[0], (10.0,), 2 * spec.k, spec.seed, spec.nu)[10.0]
        for a in alphas:
            flags = suspect_flags(spectra[a], ref)
            for i, (v, s) in enumerate(zip(spectra[a], flags)):
                rows.append(dict(family=fam, N=spec.N[0], alpha=a, index=i + 1, lambda_h=v,
                                 suspect=bool(s), config=spec.hash))
    path = out / "test3_sweep.csv"
    write_csv(path, ["family", "N", "alpha", "index", "lambda_h", "suspect", "config"], rows)
    return [path]


def run_test3_order(spec, out):
    rows = []
    for a in spec.alpha:
        cfg = Config(nu=spec.nu, alpha=a, bc="mixed")
        lam = eigen_series("unit_square", spec.families[0], spec.N, cfg, spec.k, spec.seed)
        rows += series_rows({"alpha": a}, spec.N, lam, spec.hash)
    path = out / "test3_order.csv"
    write_csv(path, _series_columns(["alpha"], spec.N), rows)
    return [path]


def lshape_uniform(ns=LSHAPE_UNIFORM, config=Config(), lam_ref=LSHAPE_LAMBDA1):
    """Uniform square meshes of the L-shape; rows of cells, dofs, lambda1, err."""
    rows = []
    for n in ns:
        mesh = generate("lshape", "T1", n)
        _, system = assemble(mesh, config)
        lam = float(solve_eigs(system, 1).eigenvalues[0])
        rows.append(dict(n=n, cells=mesh.n_cells, dofs=total_dofs(mesh), lambda1=lam,
                         err=abs(lam_ref - lam) / lam_ref))
    return rows


def vtk_writer(out, name):
    """Adaptive-loop callback writing ``test4_<name>_stepNN.vtk`` into ``out``."""

    def cb(step, mesh, system, sol, ind):
        vel, p, pi0 = eigenfunction_fields(mesh, system, sol)
        write_vtk(out / f"test4_{name}_step{step:02d}.vtk", mesh,
                  point_vectors={"velocity": vel},
                  cell_scalars={"pressure": p, "eta2": ind.eta2_cells},
                  cell_vectors={"pi0_velocity": pi0})
    return cb


def run_test4(spec, out):
    cfg = Config(nu=spec.nu, alpha=spec.alpha[0], bc="clamped")
    paths = []
    uni = lshape_uniform(spec.uniform, cfg)
    for r in uni:
        r["config"] = spec.hash
    p = out / "test4_uniform.csv"
    write_csv(p, ["n", "cells", "dofs", "lambda1", "err", "config"], uni)
    paths.append(p)
    summary = [dict(scheme="uniform",
                    slope=fit_order([r["cells"] for r in uni], [r["lambda1"] for r in uni],
                                    kind="N", reference=LSHAPE_LAMBDA1).rate,
                    cells=uni[-1]["cells"], lambda1=uni[-1]["lambda1"], err=uni[-1]["err"],
                    config=spec.hash)]
    names = {"T1": "squares", "T2": "voronoi"}
    for fam in spec.families:
        name = names.get(fam, fam.lower())
        mesh0 = generate("lshape", fam, spec.N[0], seed=spec.seed)
        hist = adaptive_loop(mesh0, cfg, steps=spec.steps, lam_ref=LSHAPE_LAMBDA1,
                             dof_budget=spec.dof_budget, jump_nu=spec.jump_nu,
                             callback=vtk_writer(out, name))
        p = out / f"test4_adaptive_{name}.csv"
        write_csv(p, HISTORY_COLUMNS, hist.rows)
        paths.append(p)
        fit = fit_order(hist.column("cells"), hist.column("lambda1"), kind="N",
                        reference=LSHAPE_LAMBDA1)
        summary.append(dict(scheme=f"adaptive_{name}", slope=fit.rate,
                            cells=hist.rows[-1]["cells"], lambda1=hist.rows[-1]["lambda1"],
                            err=hist.rows[-1]["err"], config=spec.hash))
    p = out / "test4_summary.csv"
    write_csv(p, ["scheme", "slope", "cells", "lambda1", "err", "config"], summary)
    paths.append(p)
    return paths


_RUNNERS = {"test1": run_test1, "test2": run_test2, "test3-sweep": run_test3_sweep,
            "test3-order": run_test3_order, "test4": run_test4}


def run(spec):
    """Run one experiment; returns the list of written paths.

    On failure the files written so far are kept, ``FAILED`` holds the
    traceback and the exception propagates.
    """
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    record = {"spec": spec.describe(), "hash": spec.hash}
    try:
        paths = _RUNNERS[spec.test](spec, out)
    except Exception:
        (out / "FAILED").write_text(traceback.format_exc())
        raise
    record["seconds"] = round(time.perf_counter() - t0, 3)
    record["files"] = [p.name for p in paths]
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return paths
