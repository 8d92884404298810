"""Counting surface modes: eigenvalue counts against phase-space area.

Below a level E |xi|^2 the number of depth eigenvalues grows linearly in
|xi| with slope area / (2 pi), where the area is that of the sublevel set
of the depth symbol in the (Z, zeta) plane. The relative error shrinks as
|xi| grows. A quasi-Monte Carlo estimate checks the closed-form area.

Run:  python demos/03_weyl_law.py
"""

from pathlib import Path

from surfwave import load_model, monte_carlo_area, weyl_check
from surfwave.model import layered_isotropic

MODELS = Path(__file__).parent / "models"

benches = [("Love, 3-thick layer over mu = 4, E = 2", layered_isotropic([(3.0, 1.0, 1.0)], (4.0, 4.0)), 2.0, "love"),
           ("Rayleigh, linear gradient mu = 1..9, E = 4", load_model(MODELS / "gradient.json"), 4.0, "rayleigh")]

for title, model, E, kind in benches:
    rep = weyl_check(model, (0, 0), (1.0, 0.0), E, [10, 30, 100, 300], kind=kind)
    mc, _ = monte_carlo_area(model, (0, 0), (1.0, 0.0), E, kind=kind, m=20)
    print(title)
    print(f"  area = {rep.area:.8f}   quasi-Monte Carlo = {mc:.8f}")
    print("  k      N      k area / 2 pi   rel. error")
    for r in rep.rows:
        print(f"  {r.k:<6g} {r.N:<6d} {r.prediction:<15.3f} {r.rel_error:.4f}")
    print(f"  error non-increasing: {rep.decreasing}, passes: {rep.passed}\n")
