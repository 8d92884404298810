"""Surface impedance, the Barnett-Lothe test and the surface-wave speed.

For a homogeneous half-space the surface-wave speed is the zero of
``det Z(v)`` below the limiting velocity. An isotropic Poisson solid gives
the classical Rayleigh speed. The transversely isotropic example has a
limiting velocity reached off the horizontal, and the sign test on the
extrapolated impedance at v_L still guarantees a subsonic surface wave.

Run:  python demos/02_impedance_and_rayleigh_speed.py
"""

from pathlib import Path

import numpy as np

from surfwave import barnett_lothe, limiting_velocity, load_model, secular_root
from surfwave.acoustic import acoustic_triple
from surfwave.impedance import impedance_triple, property_report

MODELS = Path(__file__).parent / "models"

for name in ("halfspace", "ti_anomalous"):
    model = load_model(MODELS / f"{name}.json")
    v_L = limiting_velocity(model, (0, 0), (1.0, 0.0), 0.0)
    bl = barnett_lothe(model, (0, 0), (1.0, 0.0))
    root = secular_root(model, (0, 0), (1.0, 0.0))
    print(f"{name}: v_L = {v_L:.10f}")
    print(f"  limit det Z = {bl.limit_det:+.5f}, trace gap = {bl.limit_trace_gap:+.5f}, condition holds: {bl.holds}")
    print(f"  surface-wave speed v0 = {root.v0:.10f} (v0 / v_L = {root.v0 / v_L:.6f})")

    trip = acoustic_triple(model, (0, 0), (1.0, 0.0), 0.0)
    print("  v/v_L   eigenvalues of Z                   det Z       riccati residual")
    for frac in (0.0, 0.5, root.v0 / v_L, 0.99):
        imp = impedance_triple(trip, frac * v_L)
        eig = " ".join(f"{e:+.5f}" for e in imp.eigenvalues)
        print(f"  {frac:<7.4f} {eig}   {imp.det.real:+.3e}  {imp.riccati_residual:.1e}")
    rep = property_report(trip, 0.5 * v_L)
    print(f"  dZ/dv at v_L/2: largest eigenvalue {rep['derivative_max_eig']:+.4f} "
          f"(negative definite), finite-difference mismatch {rep['derivative_fd_error']:.1e}\n")

print("Poisson solid check: v0^2 solves the classical cubic, v0 =", f"{np.sqrt(2 - 2 / np.sqrt(3)):.10f}")
