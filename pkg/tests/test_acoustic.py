import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracles import full_tensor, limiting_velocity_grid

from surfwave.acoustic import (AcousticTriple, acoustic_triple, decay_rate, infimum_limiting_velocity,
                               limiting_velocity, limiting_velocity_direct, limiting_velocity_triple,
                               rotated_triple, sextic, stroh_eigensystem, triple_from_voigt)
from surfwave.model import isotropic_voigt, model_from_voigt, rotate_voigt_z, ti_voigt
from conftest import random_stiffness


def test_triple_matches_tensor_contractions():
    rng = np.random.default_rng(3)
    V = random_stiffness(rng)
    C = full_tensor(V)
    xh = np.array([0.6, 0.8, 0.0])
    T, R, Q = triple_from_voigt(V, xh[:2])
    np.testing.assert_allclose(T, C[:, 2, 2, :], atol=1e-14)
    np.testing.assert_allclose(R, np.einsum("ijl,j->il", C[:, :, 2, :], xh), atol=1e-14)
    np.testing.assert_allclose(Q, np.einsum("ijkl,j,k->il", C, xh, xh), atol=1e-14)


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0, 2 * np.pi))
@settings(max_examples=15, deadline=None)
def test_isotropic_limiting_velocity_is_shear_speed(lam, mu, angle):
    trip = AcousticTriple(*triple_from_voigt(isotropic_voigt(lam, mu), (np.cos(angle), np.sin(angle))))
    assert limiting_velocity_triple(trip) == pytest.approx(np.sqrt(mu), rel=1e-10)


def test_ti_limiting_velocity_against_oracles():
    V = ti_voigt(3.0, 1.2, 1.0, 1.2, 1.2)
    trip = AcousticTriple(*triple_from_voigt(V, (1.0, 0.0)))
    lv = limiting_velocity_triple(trip, full=True)
    assert lv.v_L == pytest.approx(0.840874315258699, rel=1e-11)
    assert lv.v_L == pytest.approx(limiting_velocity_grid(V, (1.0, 0.0)), rel=1e-8)
    assert lv.v_L == pytest.approx(limiting_velocity_direct(trip), rel=1e-8)
    # the minimum sits at two symmetric off-horizontal angles
    assert sorted(np.round(np.abs(lv.angles), 3)) == [0.713, 0.713]
    # v_L(rho) singularity: Q(rho; v_L) has a zero eigenvalue at the minimizing angle
    Qr = rotated_triple(trip, lv.angles[0], lv.v_L).Q
    assert np.linalg.eigvalsh(Qr)[0] == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2 * np.pi))
def test_limiting_velocity_rotation_covariance(seed, angle):
    V = random_stiffness(np.random.default_rng(seed))
    a = limiting_velocity_triple(AcousticTriple(*triple_from_voigt(V, (1.0, 0.0))))
    b = limiting_velocity_triple(AcousticTriple(*triple_from_voigt(rotate_voigt_z(V, angle),
                                                                   (np.cos(angle), np.sin(angle)))))
    assert a == pytest.approx(b, rel=1e-9)
    assert a == pytest.approx(limiting_velocity_grid(V, (1.0, 0.0)), rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.95))
def test_sextic_roots_are_roots_and_split(seed, frac):
    V = random_stiffness(np.random.default_rng(seed))
    trip = AcousticTriple(*triple_from_voigt(V, (1.0, 0.0)))
    v = frac * limiting_velocity_triple(trip)
    sx = sextic(trip, v)
    # three roots in each open half-plane below v_L
    assert np.all(sx.roots[:3].imag < 0) and np.all(sx.roots[3:].imag > 0)
    for z in sx.roots:
        M = trip.symbol(z) - v * v * np.eye(3)
        s = np.linalg.svd(M, compute_uv=False)
        assert s[-1] <= 1e-9 * s[0]
    # roots come in conjugate pairs (real coefficients)
    np.testing.assert_allclose(np.sort_complex(sx.roots.conj()), np.sort_complex(sx.roots), atol=1e-8)


def test_isotropic_roots_closed_form():
    lam, mu, v = 1.0, 1.0, 0.6
    trip = AcousticTriple(*triple_from_voigt(isotropic_voigt(lam, mu), (1.0, 0.0)))
    roots, vecs = stroh_eigensystem(trip, v)
    lower = np.sort(roots[:3].imag)
    bs = np.sqrt(1 - v * v / mu)
    bp = np.sqrt(1 - v * v / (lam + 2 * mu))
    np.testing.assert_allclose(lower, np.sort([-bs, -bs, -bp]), rtol=1e-13)
    for z, a in zip(roots, vecs.T):
        np.testing.assert_allclose((trip.symbol(z) - v * v * np.eye(3)) @ a, 0, atol=1e-12)
    assert decay_rate(trip, v) == pytest.approx(min(bs, bp), rel=1e-13)


def test_depth_infimum(gradient):
    dm = infimum_limiting_velocity(gradient, (0, 0), (1.0, 0.0))
    assert dm.v_inf == pytest.approx(1.0, rel=1e-9) and dm.Z_at_min == 0.0
    assert dm.v_tail == pytest.approx(3.0, rel=1e-9)
    assert dm.surface_minimum


def test_model_level_wrappers():
    V = ti_voigt(3.0, 1.2, 1.0, 1.2, 1.2)
    m = model_from_voigt([0, -1], [V, V], symmetry="transversely_isotropic", interpolation="step")
    assert limiting_velocity(m, (0, 0), (0.0, 1.0), -0.5) == pytest.approx(0.840874315258699, rel=1e-10)
    trip = acoustic_triple(m, (0, 0), (1.0, 0.0), 0.0)
    assert trip.at[2] == 0.0
