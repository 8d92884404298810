"""Rays of the fundamental Love wave across a stiffening layer.

The layer shear modulus rises from 1 (x1 = 0) to 1.5 (x1 = 10). Rays bend
toward the slower side, the wavevector changes only through the lateral
gradient and sqrt(Lambda) stays constant along each ray. A point-source fan
carries the geometric-spreading amplitude from the tube Jacobian.

Run:  python demos/04_rays_in_a_laterally_varying_layer.py
"""

from pathlib import Path

import numpy as np

from surfwave import load_model
from surfwave.raytrace import build_hamiltonian, trace_fan, trace_ray, transport_amplitude

MODELS = Path(__file__).parent / "models"

model = load_model(MODELS / "lateral_love.json")
fld = build_hamiltonian(model, solver="love", k_range=(1.0, 8.0), n_k=8, n_x=(6, 1))
print(f"tabulated axes {fld.axes}, held-out interpolation error {fld.cv_error:.1e}")

angles = np.deg2rad([30, 60, 90, 120, 150])
fan = trace_fan(fld, (5.0, 0.0), 3.0, angles, 6.0, jacobian="point")
print("\nangle  end point            end wavevector       H drift   A0(end)  flags")
for a, ray in zip(angles, fan):
    H = np.array([fld.sqrt_lambda(s.x, s.xi) for s in ray])
    A = transport_amplitude(fld, ray)
    end = ray[-1]
    print(f"{np.rad2deg(a):<6.0f} ({end.x[0]:7.3f}, {end.x[1]:7.3f})  ({end.xi[0]:+.3f}, {end.xi[1]:+.3f})"
          f"     {np.max(np.abs(H / H[0] - 1)):.1e}   {A[-1]:.4f}   {','.join(end.flags) or '-'}")

# same start and direction, different frequency: dispersive rays separate
for k in (1.5, 3.0, 6.0):
    end = trace_ray(fld, (5.0, 0.0), k * np.array([np.cos(1.0), np.sin(1.0)]), 6.0)[-1]
    print(f"|eta| = {k:<4g} ends at ({end.x[0]:.4f}, {end.x[1]:.4f}), travel time {end.tau:g}")
