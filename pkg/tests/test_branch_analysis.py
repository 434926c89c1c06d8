import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bo_ensemble import branch_analysis as ba
from bo_ensemble.ensemble import quantize
from bo_ensemble.profile import DomainError
from bo_ensemble.reconstruct import u_from_sigmas
from bo_ensemble.spectral import eig_C


def comb_oracle(Omega, tau):
    # partial fractions: sum_j 1 / ((a + j)^2 + b^2) = -(pi / b) Im cot(pi (a + i b))
    a, b = Omega * tau, Omega
    return float(-(np.pi / b) * (1.0 / np.tan(np.pi * (a + 1j * b))).imag * Omega ** 2)


@pytest.fixture(scope="module")
def split6(lor):
    ens = quantize(lor, 2.0 ** -6)
    sp = eig_C(ens, 1.5, vectors=False)
    sets = ba.classify(sp, ens.epsilon, 1.5, lor)
    return ens, sp, sets


@settings(max_examples=40, deadline=None)
@given(Omega=st.floats(0.3, 3.0), tau=st.floats(-2, 2))
def test_comb_closed_form_matches_partial_fractions(Omega, tau):
    assert ba.comb_closed_form(Omega, tau) == pytest.approx(comb_oracle(Omega, tau), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(Omega=st.floats(0.3, 3.0), tau=st.floats(-2, 2))
def test_tail_corrected_comb_sum(Omega, tau):
    s = ba.comb_sum(Omega, tau, J=2000, tail=True)
    assert s == pytest.approx(comb_oracle(Omega, tau), rel=1e-9)


def test_comb_truncation_matches_tail_size():
    # the omitted tail is about 2 Omega^2 / J
    Omega, tau, J = 2.0, 0.3, 10 ** 4
    gap = comb_oracle(Omega, tau) - ba.comb_sum(Omega, tau, J)
    assert gap == pytest.approx(2 * Omega ** 2 / J, rel=1e-3)


@pytest.mark.parametrize("phi", [0.1, 0.7, 2.0])
def test_kernel_has_unit_mean(phi):
    m = quad(lambda th: ba.kernel(phi, th), 0, 2 * np.pi)[0] / (2 * np.pi)
    assert m == pytest.approx(1.0, rel=1e-10)


def test_delta_scale():
    assert ba.delta(2.0 ** -6) == pytest.approx(2.0 ** -6 * np.log(2.0 ** 6))


def test_classification_partitions(split6):
    ens, sp, sets = split6
    allidx = np.concatenate([sets.S_o, sets.S_U, sets.S_L])
    assert sorted(allidx.tolist()) == list(range(ens.N))
    assert sets.N_o + sets.N_U + sets.N_L == ens.N
    assert sets.N_L > 0 and sets.N_U > 0
    assert np.all(sp.nu[sets.S_o] > sets.nu_out)
    assert np.all(sp.nu[sets.S_L] < sets.nu_split)


def test_no_lower_branch_before_breaking(lor):
    ens = quantize(lor, 2.0 ** -5)
    sp = eig_C(ens, 0.2, vectors=False)
    assert ba.classify(sp, ens.epsilon, 0.2, lor).N_L == 0


def test_config_validation():
    with pytest.raises(ValueError):
        ba.ClassifyConfig(c_out=-1)
    assert ba.ClassifyConfig(B_growth=1.0).bound(2.0, 2.0) == pytest.approx(50.0)


def test_diagnostic_decomposition_adds_up(split6):
    ens, sp, sets = split6
    xs = np.linspace(-3, 12, 61)
    parts = ba.diagnostic_decompose(sp, sets, ens.epsilon, xs)
    np.testing.assert_allclose(sum(parts), u_from_sigmas(sp, ens.epsilon, xs), atol=1e-13)


def test_sampling_tables(split6):
    ens, sp, sets = split6
    tabs = ba.sampling_tables(sets, sp)
    assert set(tabs) == {"U", "L"}
    U, L = tabs["U"], tabs["L"]
    assert U.n == sets.N_U and L.n == sets.N_L
    assert np.all(np.diff(U.mu) > 0)
    np.testing.assert_allclose(U.mu_prime, np.diff(U.mu) * U.n)
    lower = sp.sigma[sets.S_L]
    lower = lower[np.argsort(lower.real)]
    np.testing.assert_allclose(L.mu, lower.real)
    np.testing.assert_allclose(L.nu * ens.epsilon, lower.imag, rtol=1e-12)
    y = U.y_of_mu(4.0)
    assert 0 < y < 1
    with pytest.raises(DomainError):
        U.y_of_mu(U.mu[-1] + 1.0)
    csv = U.to_csv()
    assert csv == U.to_csv()
    assert len(csv.splitlines()) == U.n + 1


def test_table_distance_is_zero_for_same_table(split6):
    ens, sp, sets = split6
    U = ba.sampling_tables(sets, sp)["U"]
    assert ba.table_distance(U, U) == 0.0


def test_fit_exponents_recovers_power_laws():
    eps = 2.0 ** -np.arange(4, 9)
    tables = []
    for e in eps:
        mu = np.array([-3 * e ** -0.5, 0.0, 2 * e ** -1.5])
        nu = np.array([e ** -0.25, 1.0, 5 * e ** -2.0])
        tables.append(ba.SamplingTable("U", np.array([1 / 6, 1 / 2, 5 / 6]), mu, nu, 1.0, e, 0.0))
    fit = ba.fit_exponents(eps, tables)
    assert fit.q_minus == pytest.approx(0.5)
    assert fit.q_plus == pytest.approx(1.5)
    assert fit.r_minus == pytest.approx(0.25)
    assert fit.r_plus == pytest.approx(2.0)
    assert min(fit.r2.values()) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ba.fit_exponents(eps[:3], tables[:3])


def test_whitham_targets(lor):
    u0, u1, u2 = sorted([(15 - np.sqrt(153)) / 18, 1.0, (15 + np.sqrt(153)) / 18])
    psi_U, psi_L, phi_L = ba.whitham_targets(lor, 4.0, 1.5)
    assert psi_U == pytest.approx(u0)
    assert psi_L == pytest.approx(u2 - u1)
    assert phi_L == pytest.approx(0.5 * np.log((u2 - u0) / (u1 - u0)))
    with pytest.raises(DomainError):
        ba.whitham_targets(lor, 20.0, 1.5)


def test_modulation_fields_and_phase_roundtrip(split6):
    ens, sp, sets = split6
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ba.PhaseAnomaly)
        f = ba.modulation_fields(ba.sampling_tables(sets, sp), ens.epsilon, 4.0, 1.5)
    assert f.r == pytest.approx(np.exp(-f.phi_L))
    assert f.psi_L > 0 and f.phi_L > 0
    xs = np.linspace(3.9, 4.1, 401)
    u = ba.periodic_profile(f, xs, p=0.23)
    assert ba.fit_phase(f, xs, u) == pytest.approx(0.23, abs=1e-6)
    # crest height above psi_U
    assert ba.periodic_profile(f, [f.x0], p=0.0)[0] - f.psi_U == pytest.approx(ba.wave_amplitude(f))
