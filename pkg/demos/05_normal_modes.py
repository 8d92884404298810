"""Free-oscillation catalog of a radially layered ball.

On a ball of scaled radius 1/eps the surface Laplacian has eigenvalues
l (l + 1), so each degree l samples the flat dispersion curves at
k = eps sqrt(l (l + 1)). Toroidal modes come from the Love branches and
spheroidal modes from the Rayleigh branches. At large l the fundamental
spheroidal mode travels at the Rayleigh speed.

Run:  python demos/05_normal_modes.py
"""

from pathlib import Path

from surfwave import load_model, mode_catalog, secular_root

MODELS = Path(__file__).parent / "models"

model = load_model(MODELS / "gradient.json")
cat = mode_catalog(model, 0.2, range(2, 9), n_max=2)
print("label   k        omega      degeneracy")
for e in cat:
    print(f"{e.label:<7} {e.k:<8.4f} {e.omega:<10.6f} {e.degeneracy}")

half = load_model(MODELS / "halfspace.json")
v0 = secular_root(half, (0, 0), (1.0, 0.0)).v0
print("\nhomogeneous ball, fundamental spheroidal mode: omega / k -> v0 =", f"{v0:.8f}")
for l in (10, 100, 1000):
    e = mode_catalog(half, 1.0, [l], n_max=0, types=("spheroidal",))[0]
    print(f"  l = {l:<5d} omega / k = {e.omega / e.k:.8f}")
