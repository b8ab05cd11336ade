"""Lowest Stokes eigenvalues of the clamped square (-1, 1)^2.

Builds meshes of every family, solves the discrete eigenproblem on three
refinements and fits the convergence order and the extrapolated limit.
Run with ``python demos/clamped_square.py [N ...]``.
"""

import sys

import numpy as np

from vemstokes import Config, fit_order
from vemstokes.bench import eigen_series

REFERENCE = np.array([13.086, 23.031, 23.031, 32.053])

Ns = tuple(int(a) for a in sys.argv[1:]) or (8, 16, 32)
h = 1.0 / np.array(Ns)

for family in ("T1", "T2", "T3", "T4", "T5"):
    lam = eigen_series("square", family, Ns, Config(), k=4, seed=42)
    print(f"\n{family}: lowest four eigenvalues for N = {Ns}")
    for i in range(4):
        fit = fit_order(h, lam[:, i])
        row = "  ".join(f"{v:9.5f}" for v in lam[:, i])
        print(f"  lambda{i + 1}: {row}   order {fit.rate:5.2f}   extr {fit.extrapolated:9.5f}"
              f"   (reference {REFERENCE[i]})")
