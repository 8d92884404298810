import numpy as np
import pytest
from hypothesis import given, strategies as st
from oracles import love_area_layers, rayleigh_area_gradient

from surfwave.model import layered_isotropic
from surfwave.weyl import (branch_functions, branch_gap, error_decreasing, monte_carlo_area, phase_space_volume,
                           weyl_check)


@pytest.fixture(scope="module")
def love_bench():
    return layered_isotropic([(3.0, 1.0, 1.0)], (4.0, 4.0))


def test_love_area_closed_form(love_bench):
    vol = phase_space_volume(love_bench, (0, 0), (1.0, 0.0), 2.0, kind="love")
    assert vol.total == pytest.approx(6.0, rel=1e-12)
    assert vol.total == pytest.approx(love_area_layers([(3.0, 1.0)], 2.0), rel=1e-12)
    assert vol.labels == ("SH",) and not vol.flags


def test_rayleigh_area_against_quadrature_oracle(gradient):
    vol = phase_space_volume(gradient, (0, 0), (1.0, 0.0), 4.0, kind="rayleigh")
    assert vol.total == pytest.approx(rayleigh_area_gradient(4.0, 1.0, 9.0, 3.0), rel=1e-9)
    assert vol.labels == ("S", "P") and np.all(vol.areas > 0)


def test_anisotropic_kind_agrees_and_flags_degeneracy(gradient):
    a = phase_space_volume(gradient, (0, 0), (1.0, 0.0), 4.0, kind="anisotropic")
    r = phase_space_volume(gradient, (0, 0), (1.0, 0.0), 4.0, kind="rayleigh")
    love = phase_space_volume(gradient, (0, 0), (1.0, 0.0), 4.0, kind="love")
    # isotropic: the three sorted branches are SH, SV (identical) and P
    assert a.total == pytest.approx(r.total + love.total, rel=1e-6)
    assert a.flags and "degeneracy" in a.flags[0]
    assert branch_gap(gradient, (0, 0), (1.0, 0.0)) < 1e-8


def test_monte_carlo_cross_check(love_bench, gradient):
    est, box = monte_carlo_area(love_bench, (0, 0), (1.0, 0.0), 2.0, kind="love")
    assert est == pytest.approx(6.0, rel=1e-3)
    est, _ = monte_carlo_area(gradient, (0, 0), (1.0, 0.0), 4.0, kind="rayleigh")
    assert est == pytest.approx(rayleigh_area_gradient(4.0, 1.0, 9.0, 3.0), rel=1e-3)


def test_branch_functions_isotropic_values(halfspace):
    c = branch_functions(halfspace, (0, 0), (1.0, 0.0), -0.2, 0.5)
    # mu (1 + zeta^2) twice and (lambda + 2 mu)(1 + zeta^2) once
    np.testing.assert_allclose(c, [1.25, 1.25, 3.75], rtol=1e-13)


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_error_decreasing_accepts_sorted(errs):
    errs = sorted(errs, reverse=True)
    assert error_decreasing(errs) == (errs[-1] < errs[0])


def test_error_decreasing_rules():
    assert error_decreasing([0.2, 0.1, 0.1, 0.05])
    assert not error_decreasing([0.1, 0.2, 0.05])
    assert not error_decreasing([0.1, 0.1])
    assert error_decreasing([0.0, 0.0])


def test_love_weyl_small(love_bench):
    rep = weyl_check(love_bench, (0, 0), (1.0, 0.0), 2.0, [10, 30, 100], kind="love")
    assert [r.N for r in rep.rows] == [10, 29, 96]
    assert rep.decreasing and rep.passed
    with pytest.raises(ValueError):
        weyl_check(love_bench, (0, 0), (1.0, 0.0), 4.5, [10], kind="love")
    with pytest.raises(ValueError):
        phase_space_volume(love_bench, (0, 0), (1.0, 0.0), 2.0, kind="bogus")
