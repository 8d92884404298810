import numpy as np
import pytest
from oracles import rayleigh_speed

from surfwave.errors import SymmetryMismatch
from surfwave.model import model_from_dict, model_from_voigt
from surfwave.modes import asymptotic_mode_solution, degree_wavenumber, mode_catalog
from surfwave.raytrace import build_hamiltonian
from surfwave.spectrum import counting_function, dispersion_curve
from conftest import random_stiffness


def _gradient(depth):
    return model_from_dict({"symmetry": "isotropic", "Z_I": -depth, "interpolation": "linear",
                            "knots": [{"Z": 0.0, "c": {"lambda": 1.0, "mu": 1.0}},
                                      {"Z": -depth, "c": {"lambda": 9.0, "mu": 9.0}}]})


def test_degree_wavenumber():
    assert degree_wavenumber(3, 0.5) == pytest.approx(0.5 * np.sqrt(12.0))
    assert degree_wavenumber(3, 0.5, jeans=True) == pytest.approx(1.75)


def test_catalog_matches_dispersion_solve_bit_for_bit(gradient):
    eps, ls = 0.2, [15, 30, 60]
    cat = mode_catalog(gradient, eps, ls, n_max=2)
    for mode_type, solver in (("toroidal", "love"), ("spheroidal", "rayleigh")):
        ks = [degree_wavenumber(l, eps) for l in ls]
        for n in range(2):
            dc = dispersion_curve(gradient, (0, 0), (1.0, 0.0), ks, branch=n, solver=solver)
            ours = [e.omega for e in cat if e.type == mode_type and e.n == n]
            np.testing.assert_array_equal(ours, np.sqrt(dc.Lambda))


def test_catalog_monotone_and_labelled(gradient):
    cat = mode_catalog(gradient, 0.2, range(2, 12), n_max=3)
    assert cat[0].label == "0T2" and all(e.degeneracy == 2 * e.l + 1 for e in cat)
    for t in ("toroidal", "spheroidal"):
        for l in range(2, 12):
            w = [e.omega for e in cat if e.type == t and e.l == l]
            assert np.all(np.diff(w) > 0)
        w0 = [e.omega for e in cat if e.type == t and e.n == 0]
        assert np.all(np.diff(w0) > 0) and w0[0] > 0


def test_toroidal_count_matches_counting_function(gradient):
    eps, l, E = 0.2, 20, 3.0
    cat = mode_catalog(gradient, eps, [l], n_max=50, types=("toroidal",))
    k = degree_wavenumber(l, eps)
    n = counting_function(gradient, (0, 0), (k, 0.0), E, solver="love")
    assert n == sum(e.omega**2 <= E * k * k for e in cat)


def test_large_degree_spheroidal_approaches_rayleigh_speed(halfspace):
    e = mode_catalog(halfspace, 1.0, [1000], n_max=0, types=("spheroidal",))[0]
    assert e.omega / e.k == pytest.approx(rayleigh_speed(1.0, 1.0), rel=1e-2)


def test_rescaling_oracle():
    # stretching depth by 2 maps Lambda(k) to Lambda(2 k) / 4, so halving
    # epsilon halves every frequency at the same degree
    a = mode_catalog(_gradient(3.0), 0.2, [4, 9, 16], n_max=0)
    b = mode_catalog(_gradient(6.0), 0.1, [4, 9, 16], n_max=0)
    assert len(a) == len(b) == 6
    for ea, eb in zip(a, b):
        assert (ea.type, ea.l) == (eb.type, eb.l)
        assert eb.omega == pytest.approx(0.5 * ea.omega, rel=1e-7)


def test_quantization_report(gradient):
    fld = build_hamiltonian(gradient, solver="love", k_range=(0.5, 6.0), n_k=12)
    cat = mode_catalog(gradient, 0.2, [10, 11], n_max=0, types=("toroidal",))
    rep = asymptotic_mode_solution(fld, cat[0].omega, 0.2, catalog=cat, model=gradient)
    assert rep.l_continuous == pytest.approx(10.0, abs=1e-3)
    assert rep.gap > 0 and rep.level_residual < 1e-12
    assert np.all(rep.catalog_residuals < 1e-12)
    with pytest.raises(ValueError):
        asymptotic_mode_solution(fld, 100.0, 0.2)


def test_jeans_option_shifts_wavenumber(gradient):
    a = mode_catalog(gradient, 0.2, [10], n_max=0, types=("toroidal",))[0]
    b = mode_catalog(gradient, 0.2, [10], n_max=0, types=("toroidal",), jeans=True)[0]
    assert b.k == pytest.approx(2.1) and b.k > a.k and b.omega > a.omega


def test_catalog_preconditions(gradient, lateral_love):
    V = random_stiffness(np.random.default_rng(2))
    with pytest.raises(SymmetryMismatch):
        mode_catalog(model_from_voigt([0, -1], [V, V], interpolation="step"), 0.2, [3], 1)
    with pytest.raises(ValueError):
        mode_catalog(lateral_love, 0.2, [3], 1)
    with pytest.raises(ValueError):
        mode_catalog(gradient, 0.2, [0], 1)
    with pytest.raises(ValueError):
        mode_catalog(gradient, -1.0, [3], 1)
