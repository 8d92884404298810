"""Love waves in a soft layer: dispersion, cutoffs and group velocity.

A unit-thickness layer (mu = 1) sits on a stiffer half-space (mu = 4), so
horizontally polarized waves are trapped at speeds between 1 and 2. The
number of trapped overtones grows with wavenumber and every branch slows
toward the layer speed as k increases.

Run:  python demos/01_love_dispersion.py
"""

from pathlib import Path

import numpy as np

from surfwave import load_model
from surfwave.spectrum import dispersion_curve, love_spectrum

MODELS = Path(__file__).parent / "models"

model = load_model(MODELS / "love_layer.json")

print("k     modes   phase velocities")
for k in (0.5, 1.0, 2.0, 5.0, 10.0):
    res = love_spectrum(model, (0, 0), k, vectors=False)
    speeds = " ".join(f"{c:.5f}" for c in res.phase_velocity)
    print(f"{k:<5g} {len(res.eigenvalues):<7d} {speeds}")

# follow the fundamental branch and compare phase with group velocity
ks = np.linspace(0.5, 6.0, 12)
dc = dispersion_curve(model, (0, 0), (1.0, 0.0), ks, branch=0, solver="love")
print("\nfundamental branch (group velocity below phase velocity: normal dispersion)")
print("k       c_phase   c_group")
for k, c, u in zip(dc.k, dc.phase_velocity, dc.group_velocity):
    print(f"{k:<7.3f} {c:.6f}  {u:.6f}")
