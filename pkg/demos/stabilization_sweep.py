"""How the stabilisation factor alpha shapes the discrete spectrum.

On the unit square with the bottom edge clamped and the rest traction free,
a coarse 11 x 11 mesh is solved for several alpha. Modes that have no partner
within 2% in the alpha = 10 spectrum are flagged as suspect: they move with
the stabilisation instead of approximating the continuous problem.
"""

import numpy as np

from vemstokes.bench import suspect_flags, sweep_spectra

alphas = (0.1, 0.2, 1.0, 5.0, 10.0)
for family in ("T1", "T2", "T5"):
    spectra = sweep_spectra(family, 11, alphas, k=10, seed=42)
    ref = sweep_spectra(family, 11, (10.0,), k=20, seed=42)[10.0]
    print(f"\n{family}")
    for a in alphas:
        flags = suspect_flags(spectra[a], ref)
        cells = [f"{v:8.4f}{'*' if s else ' '}" for v, s in zip(spectra[a], flags)]
        print(f"  alpha={a:5.1f}: " + " ".join(cells))
    inside = {a: int(np.sum((v > 2.5) & (v < 7.0))) for a, v in spectra.items()}
    print(f"  eigenvalues in (2.5, 7): {inside}")
print("\n* = suspect (absent from the alpha = 10 spectrum)")
