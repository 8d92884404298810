import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import rayleigh_speed

from surfwave.acoustic import AcousticTriple, acoustic_triple, limiting_velocity_triple, triple_from_voigt
from surfwave.impedance import (barnett_lothe, barnett_lothe_triple, factorization_residual, impedance,
                                impedance_derivative, impedance_triple, property_report, rayleigh_secular_speed,
                                root_matrix_stroh, root_matrix_triple, secular_root, secular_root_triple)
from surfwave.model import isotropic_voigt, ti_voigt
from conftest import random_stiffness


def _triple(V, xh=(1.0, 0.0)):
    return AcousticTriple(*triple_from_voigt(V, xh))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.9))
def test_contour_root_matrix_matches_eigenvector_route(seed, frac):
    trip = _triple(random_stiffness(np.random.default_rng(seed)))
    v = frac * limiting_velocity_triple(trip)
    rm = root_matrix_triple(trip, v)
    np.testing.assert_allclose(rm.S1, root_matrix_stroh(trip, v), atol=1e-9 * np.abs(rm.S1).max())
    assert rm.margin > 0
    assert factorization_residual(trip, v, rm.S1) < 1e-10


def test_isotropic_impedance_closed_form():
    lam, mu = 1.0, 1.0
    trip = _triple(isotropic_voigt(lam, mu))
    for v in (0.0, 0.5, 0.9):
        imp = impedance_triple(trip, v)
        # the SH entry decouples: mu sqrt(1 - v^2 / mu)
        assert imp.Z[1, 1].real == pytest.approx(mu * np.sqrt(1 - v * v / mu), rel=1e-12)
        assert abs(imp.Z[1, 0]) < 1e-12 and abs(imp.Z[1, 2]) < 1e-12
    assert np.all(impedance_triple(trip, 0.0).eigenvalues > 0)


def test_secular_root_poisson_solid(halfspace):
    t0 = time.perf_counter()
    root = secular_root(halfspace, (0, 0), (1.0, 0.0))
    elapsed = time.perf_counter() - t0
    assert root.v0 == pytest.approx(rayleigh_speed(1.0, 1.0), rel=1e-12)
    assert root.v0 == pytest.approx(rayleigh_secular_speed(1.0, 1.0), rel=1e-12)
    assert elapsed < 1.0
    # the null vector of the impedance at v0 is the surface polarization
    Z = impedance(halfspace, (0, 0), (1.0, 0.0), root.v0).Z
    assert np.linalg.norm(Z @ root.phi0) < 1e-8 * np.abs(Z).max()


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0, 10.0])
def test_secular_root_across_poisson_ratios(lam):
    trip = _triple(isotropic_voigt(lam, 1.0))
    assert secular_root_triple(trip).v0 == pytest.approx(rayleigh_speed(lam, 1.0), rel=1e-11)


def test_barnett_lothe_anomalous_ti():
    trip = _triple(ti_voigt(3.0, 1.2, 1.0, 1.2, 1.2))
    bl = barnett_lothe_triple(trip)
    assert bl.holds
    assert bl.limit_det == pytest.approx(-0.1478, abs=2e-4)
    assert bl.limit_trace_gap == pytest.approx(-0.4209, abs=2e-4)
    assert secular_root_triple(trip).v0 == pytest.approx(0.7539234563, rel=1e-9)


def test_barnett_lothe_isotropic_determinant_vanishes(halfspace):
    bl = barnett_lothe(halfspace, (0, 0), (1.0, 0.0))
    assert abs(bl.limit_det) < 1e-8
    assert bl.limit_trace_gap == pytest.approx(-2.0, abs=1e-6)
    assert bl.holds and bl.surface_minimum


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_property_suite_random(seed):
    trip = _triple(random_stiffness(np.random.default_rng(seed)))
    v_L = limiting_velocity_triple(trip)
    for v in np.linspace(0.0, 0.95 * v_L, 4):
        rep = property_report(trip, v)
        assert rep["hermitian_defect"] < 1e-10
        assert rep["real_part_min_eig"] > 0
        assert rep["nonpositive_count"] <= 1
        assert rep["riccati_residual"] < 1e-8
        if v > 0:
            assert rep["derivative_max_eig"] < 0
            assert rep["derivative_fd_error"] < 1e-6


def test_derivative_matches_isotropic_sh_entry(halfspace):
    v = 0.6
    dZ = impedance_derivative(halfspace, (0, 0), (1.0, 0.0), v)
    # d/dv of sqrt(1 - v^2) is -v / sqrt(1 - v^2)
    assert dZ[1, 1].real == pytest.approx(-v / np.sqrt(1 - v * v), rel=1e-10)


def test_model_wrapper_uses_surface_values(gradient):
    a = impedance(gradient, (0, 0), (1.0, 0.0), 0.3).Z
    b = impedance_triple(acoustic_triple(gradient, (0, 0), (1.0, 0.0), 0.0), 0.3).Z
    np.testing.assert_array_equal(a, b)
