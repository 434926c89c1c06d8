import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bo_ensemble.profile import (
    DomainError,
    ProfileError,
    cumulative_density_quad,
    density,
    get_profile,
    lambda_map,
    lorentzian,
    phase,
    quartic,
    turning_points,
    validate_profile,
)
from conftest import lorentzian_turning_points

lam_strategy = st.floats(min_value=-1.999, max_value=-1e-6)


def test_lorentzian_basic_constants(lor):
    assert lor.peak == pytest.approx(2.0)
    assert lor.decay_power == 1
    assert lor.decay_const == pytest.approx(2.0)
    # M = (1 / 2 pi) int u0 dx = 1
    total = quad(lor.u0, -np.inf, np.inf)[0] / (2 * np.pi)
    assert lor.mass == pytest.approx(total, rel=1e-10)
    assert lor.mass == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("factory", [lorentzian, quartic])
def test_validate_known_profiles(factory):
    validate_profile(factory())


def test_unknown_profile_name():
    with pytest.raises(ProfileError):
        get_profile("gaussian")


def test_amplitude_scaling(lor):
    p = lor.with_amplitude(1.5)
    assert p.peak == pytest.approx(3.0)
    assert p.u0(0.7) == pytest.approx(1.5 * lor.u0(0.7))
    with pytest.raises(ProfileError):
        lor.with_amplitude(-1.0)


@settings(max_examples=50, deadline=None)
@given(lam=lam_strategy)
def test_turning_points_closed_form(lam):
    lor = lorentzian()
    xm, xp = turning_points(lor, lam)
    em, ep = lorentzian_turning_points(lam)
    assert xm == pytest.approx(em, rel=1e-9, abs=1e-9)
    assert xp == pytest.approx(ep, rel=1e-9, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(lam=lam_strategy)
def test_generic_turning_points_match_exact(lam):
    lor = lorentzian()
    a = turning_points(lor, lam, exact=True)
    b = turning_points(lor, lam, exact=False)
    np.testing.assert_allclose(a, b, rtol=1e-8, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(lam=lam_strategy)
def test_density_and_phase(lam):
    lor = lorentzian()
    _, xp = lorentzian_turning_points(lam)
    assert density(lor, lam) == pytest.approx(xp / np.pi, rel=1e-9)
    assert phase(lor, lam) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("lam", [-1.9, -1.0, -0.3, -1e-3])
def test_cumulative_against_independent_quadrature(lor, lam):
    lmap = lambda_map(lor)
    oracle = quad(lambda s: lorentzian_turning_points(s)[1] / np.pi, -2.0, lam, limit=200)[0]
    assert lmap.cumulative(lam) == pytest.approx(oracle, rel=1e-8)
    assert cumulative_density_quad(lor, lam) == pytest.approx(oracle, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(y=st.floats(min_value=1e-4, max_value=1 - 1e-4))
def test_lambda_map_inverts_cumulative(y):
    lmap = lambda_map(lorentzian())
    lam = float(lmap(y))
    assert lmap.cumulative(lam) == pytest.approx(y, rel=1e-10, abs=1e-12)
    assert lmap.derivative(y) == pytest.approx(1.0 / density(lorentzian(), lam), rel=1e-6)


def test_lambda_map_domain(lor):
    lmap = lambda_map(lor)
    with pytest.raises(DomainError):
        lmap(1.5)
    with pytest.raises(DomainError):
        lmap(-0.1)


def test_lambda_map_is_monotone(lor):
    y, lam = lambda_map(lor).table(512)
    assert np.all(np.diff(lam) > 0)
    assert lam[0] > -lor.peak and lam[-1] < 0
