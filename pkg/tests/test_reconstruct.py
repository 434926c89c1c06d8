import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bo_ensemble.ensemble import quantize
from bo_ensemble.profile import lorentzian
from bo_ensemble.reconstruct import (
    CollisionError,
    ReconstructError,
    analytic_mass,
    antiderivative_I,
    cm_flow,
    cm_rhs,
    fd_step,
    hilbert_u,
    match_spectra,
    sample,
    truncation_bound,
    u_alpha,
    u_from_sigmas,
    u_logdet_fd,
)
from bo_ensemble.spectral import alpha_velocities, eig_A, eig_C


def test_single_lorentzian_mass():
    sigma = np.array([0.3 + 0.2j])
    eps = 0.1
    total = quad(lambda x: u_from_sigmas(sigma, eps, x), -np.inf, np.inf)[0]
    assert total == pytest.approx(2 * np.pi * eps, rel=1e-9)


def test_ensemble_mass(ens5):
    sp = eig_C(ens5, 1.5, vectors=False)
    f = lambda x: float(u_from_sigmas(sp, ens5.epsilon, x))
    pts = sorted(sp.mu[(sp.mu > -20) & (sp.mu < 40)])
    total = quad(f, -np.inf, -20)[0] + quad(f, -20, 40, points=pts[:40], limit=2000)[0] + quad(f, 40, np.inf)[0]
    assert total == pytest.approx(analytic_mass(ens5), rel=1e-6)


@pytest.mark.parametrize("t", [0.0, 0.8, 1.5])
@pytest.mark.parametrize("x", [-2.0, 0.5, 4.0, 9.0])
def test_alpha_and_sigma_routes(ens5, x, t):
    sig = float(u_from_sigmas(eig_C(ens5, t, vectors=False), ens5.epsilon, x))
    assert u_alpha(ens5, x, t) == pytest.approx(sig, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("x", [-1.0, 4.0])
def test_logdet_route(ens5, x):
    sig = float(u_from_sigmas(eig_C(ens5, 1.5, vectors=False), ens5.epsilon, x))
    assert u_logdet_fd(ens5, x, 1.5) == pytest.approx(sig, rel=1e-5, abs=1e-7)


def test_logdet_route_rejects_large_N(lor):
    with pytest.raises(ReconstructError):
        u_logdet_fd(quantize(lor, 2.0 ** -7), 0.0, 0.0)


@pytest.mark.parametrize("x", [0.3, 4.0])
def test_antiderivative_derivative(ens5, x):
    t = 1.5
    h = 1e-5
    eps = ens5.epsilon
    fd = (antiderivative_I(eig_A(ens5, x + h, t), eps) - antiderivative_I(eig_A(ens5, x - h, t), eps)) / (2 * h)
    assert fd == pytest.approx(u_alpha(ens5, x, t), rel=1e-6, abs=1e-8)


def test_hilbert_companion_is_analytic():
    # u + i H u = sum 2 eps i / (x - conj sigma) ... check a single pole
    sigma = np.array([1.0 + 0.5j])
    eps = 0.2
    x = np.linspace(-3, 3, 7)
    z = 2j * eps / (x - sigma.conj()[0])
    np.testing.assert_allclose(u_from_sigmas(sigma, eps, x), z.real, atol=1e-14)
    np.testing.assert_allclose(hilbert_u(sigma, eps, x), -z.imag, atol=1e-14)


def test_cutoff_truncation_bound(ens5):
    x, t, r = 4.0, 1.5, 0.4
    eps = ens5.epsilon
    full = u_alpha(ens5, x, t)
    cut = u_alpha(ens5, x, t, cutoff=eps ** r)
    assert abs(full - cut) <= truncation_bound(ens5.L, ens5.N, eps, r)


def test_fd_step():
    assert fd_step(1.0) == pytest.approx(1e-3)
    assert fd_step(1e-4) == pytest.approx(1e-5)


@pytest.mark.parametrize("route", ["ALPHA", "SIGMA"])
def test_sample_csv_is_deterministic(ens5, route):
    xs = np.linspace(-1, 6, 9)
    a = sample(ens5, xs, 1.5, route).to_csv()
    b = sample(ens5, xs, 1.5, route).to_csv()
    assert a == b
    assert a.splitlines()[0].startswith("x,")


def test_sample_unknown_route(ens5):
    with pytest.raises(ValueError):
        sample(ens5, [0.0], 0.0, "FOURIER")


def test_cm_flow_matches_decomposition(lor):
    ens = quantize(lor, 2.0 ** -4)
    res = cm_flow(ens, 0.0, 1.0, tol=1e-11)
    assert res.deviation < 1e-8


def test_cm_flow_time_reversal(lor):
    ens = quantize(lor, 2.0 ** -4)
    fwd = cm_flow(ens, 0.0, 0.8, tol=1e-12, check=False)
    back = cm_flow(ens, 0.8, 0.0, tol=1e-12, sigma0=fwd.final, check=False)
    _, dev = match_spectra(eig_C(ens, 0.0, vectors=False).sigma, back.final)
    assert dev < 1e-9


def test_cm_rhs_collision():
    with pytest.raises(CollisionError):
        cm_rhs(np.array([1.0 + 1j, 1.0 + 1j]), 0.1)


@settings(max_examples=20, deadline=None)
@given(perm_seed=st.integers(0, 1000))
def test_match_spectra_recovers_permutation(perm_seed):
    rng = np.random.default_rng(perm_seed)
    a = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    p = rng.permutation(9)
    perm, dev = match_spectra(a, a[p])
    np.testing.assert_array_equal(a[p][perm], a)
    assert dev == 0.0


def test_alpha_velocities_sum_rule(ens5):
    # sum_k alpha_x,k = tr D^2 = sum -2 lam_j
    ax, _ = alpha_velocities(eig_A(ens5, 1.0, 0.5), ens5)
    assert ax.sum() == pytest.approx(np.sum(-2 * ens5.lam), rel=1e-12)


def test_profile_limit_at_time_zero():
    lor = lorentzian()
    ens = quantize(lor, 2.0 ** -8)
    xs = np.array([-3.0, -1.0, 0.0, 1.5, 5.0])
    u = u_from_sigmas(eig_C(ens, 0.0, vectors=False), ens.epsilon, xs)
    np.testing.assert_allclose(u, lor.u0(xs), atol=0.05)
