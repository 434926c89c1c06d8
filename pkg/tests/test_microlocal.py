import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bo_ensemble import microlocal as ml
from bo_ensemble.burgers import branches, caustics
from bo_ensemble.ensemble import build_B, quantize
from bo_ensemble.profile import DomainError
from bo_ensemble.spectral import eig_A


@settings(max_examples=60, deadline=None)
@given(th=st.floats(-20, 20))
def test_sawtooth_properties(th):
    u = float(ml.U(th))
    assert -np.pi <= u <= np.pi
    assert float(ml.U(th + 2 * np.pi)) == pytest.approx(u, abs=1e-9)
    # U(theta) - theta is a multiple of pi
    k = (u - th) / np.pi
    assert k == pytest.approx(round(k), abs=1e-9)


def test_sawtooth_values():
    np.testing.assert_allclose(ml.U([np.pi / 2, -np.pi / 2, np.pi, 0.0, 2 * np.pi]),
                               [-np.pi / 2, np.pi / 2, 0.0, np.pi, np.pi])


@settings(max_examples=60, deadline=None)
@given(th=st.floats(1e-6, np.pi - 1e-6), sign=st.sampled_from([-1.0, 1.0]))
def test_sawtooth_involution_and_oddness(th, sign):
    th = sign * th
    assert float(ml.U(ml.U(th))) == pytest.approx(th, abs=1e-12)
    assert float(ml.U(-th)) == pytest.approx(-float(ml.U(th)), abs=1e-12)


def test_labels():
    lab, split = ml.label_velocities([0.1, 1.0, 3.0, 10.0], 0.25, 16.0, 2.0)
    assert split == pytest.approx(2.0)
    assert lab[0] == ml.SLOW and lab[3] == ml.FAST
    lab2, split2 = ml.label_velocities([2.1], 0.25, 16.0, 2.0)
    assert lab2[0] == ml.AMBIGUOUS
    _, split3 = ml.label_velocities([1.0], 0.5, None, 2.0)
    assert split3 == pytest.approx(np.sqrt(0.5 * 4.0))


def test_velocity_predictions(lor):
    u0, u1, u2 = branches(lor, 4.0, 1.5).values
    vs, vf = ml.velocity_predictions(lor, 4.0, 1.5, 2.0 ** -6)
    assert vs == pytest.approx(u0 / np.log(2.0 ** 6))
    assert vf == pytest.approx(2 * (u2 - u1) / np.log((u2 - u0) / (u1 - u0)))
    assert ml.velocity_predictions(lor, 20.0, 1.5, 2.0 ** -6)[1] is None


def test_small_eigs(ens6):
    s = ml.small_eigs(ens6, 4.0, 1.5)
    assert np.all(np.abs(s.alpha) <= ens6.epsilon ** 0.4)
    full = eig_A(ens6, 4.0, 1.5).alpha
    assert s.alpha.size == np.count_nonzero(np.abs(full) <= ens6.epsilon ** 0.4)
    for lab in (ml.FAST, ml.SLOW):
        pos = s.of(lab)
        assert np.all(np.diff(np.abs(s.alpha[pos])) >= 0)
    assert s.to_csv().splitlines()[0] == "alpha,alpha_x,class"
    with pytest.raises(ValueError):
        ml.small_eigs(ens6, 4.0, 1.5, r=0.9)


def test_density_total_mass(lor):
    # int G dalpha = (2 pi)^-1 int (x+ - x-) dlam = M
    assert ml.density_G_cdf(lor, -50, 50, 4.0, 1.5) == pytest.approx(lor.mass, rel=1e-6)


def test_density_cdf_derivative(lor):
    a, h = 0.05, 1e-4
    fd = (ml.density_G_cdf(lor, -1, a + h, 4.0, 1.5) - ml.density_G_cdf(lor, -1, a - h, 4.0, 1.5)) / (2 * h)
    assert fd == pytest.approx(ml.density_G(lor, a, 4.0, 1.5), rel=1e-4)


def test_density_log_singularity(lor):
    a1, a2 = 1e-5, 1e-7
    diff = ml.density_G(lor, a2, 4.0, 1.5) - ml.density_G(lor, a1, 4.0, 1.5)
    assert diff == pytest.approx(ml.density_G_asymptotic(lor, a2) - ml.density_G_asymptotic(lor, a1), rel=1e-3)


@pytest.mark.parametrize("alpha", [1e-3, 1e-4, 1e-5])
def test_eta_small_root(lor, alpha):
    e = ml.eta(lor, alpha, 4.0, 1.5)
    assert lor.u0(alpha / (2 * e) + 4.0 + 3.0 * e) == pytest.approx(-e, rel=1e-10)
    assert e == pytest.approx(ml.eta_asymptotic(lor, alpha), rel=10 * alpha)


def test_cdf_deviation_of_exact_quantiles(lor):
    # alphas at the quantiles of G give deviation at most one step
    eps = 0.02
    w = 0.5
    total = ml.density_G_cdf(lor, -w, w, 4.0, 1.5)
    n = int(total / eps)
    from scipy.optimize import brentq
    qs = [brentq(lambda a: ml.density_G_cdf(lor, -w, a, 4.0, 1.5) - eps * (k + 0.5), -w, w, xtol=1e-10)
          for k in range(n)]
    assert ml.cdf_deviation(qs, eps, lor, 4.0, 1.5, w) <= eps * 1.01


def test_orbit_identity(lor):
    orb = ml.orbit(lor, 4.0, 1.5)
    assert orb.identity_residual(lor) < 1e-10
    assert orb.admissible.any()
    assert orb.to_csv().splitlines()[0] == "lambda,theta,admissible"


def test_admissible_intervals(lor):
    iv = ml.admissible_intervals(lor, 4.0, 1.5)
    assert len(iv) == 2 and iv[0][1] == 0.0
    assert len(ml.admissible_intervals(lor, 20.0, 1.5)) == 1


def test_eikonal_domain(lor):
    with pytest.raises(DomainError):
        ml.eikonal_Sprime(lor, 0.02, 4.0, 1.5)  # lam near -L lies outside both intervals


@pytest.mark.parametrize("kind,x0", [("fast", 4.0), ("slow", 4.0), ("slow", 9.0)])
def test_g0_derivative_identity(lor, kind, x0):
    h = 1e-4
    d = -(ml.g0(lor, x0 + h, 1.5, kind) - ml.g0(lor, x0 - h, 1.5, kind)) / (2 * h)
    u = branches(lor, x0, 1.5).values
    f = u[2] - u[1] if kind == "fast" else u[0]
    assert d == pytest.approx(f, rel=1e-6)


def test_g0_fast_requires_triple_region(lor):
    with pytest.raises(DomainError):
        ml.g0(lor, 20.0, 1.5, "fast")


def test_crossings_are_null_points(lor):
    ens = quantize(lor, N=8)
    Xm, Xp = -50.0, 50.0
    cr = ml.zero_crossings(ens, 1.5, (Xm, Xp))
    np.testing.assert_allclose(np.sort(cr.x), np.linalg.eigvalsh(build_B(ens, 1.5)), atol=1e-10)
    for x, ax in zip(cr.x, cr.alpha_x):
        sp = eig_A(ens, x, 1.5)
        k = np.argmin(np.abs(sp.alpha))
        assert abs(sp.alpha[k]) < 1e-10
        from bo_ensemble.spectral import alpha_velocities
        assert alpha_velocities(sp, ens)[0][k] == pytest.approx(ax, rel=1e-8)


def test_bohr_sommerfeld_prediction(lor, ens6):
    Xm, Xp = caustics(lor, 1.5)
    cr = ml.zero_crossings(ens6, 1.5, (Xm, Xp))
    bs = ml.bohr_sommerfeld(lor, 4.0, 1.5, ens6.epsilon, cr)
    assert bs.dx_plus == pytest.approx(2 * np.pi * ens6.epsilon / bs.f_plus)
    assert bs.anchor_plus is not None
    np.testing.assert_allclose(bs.grid("fast", [0, 1]), [bs.anchor_plus, bs.anchor_plus - bs.dx_plus])
    assert set(bs.as_dict()) >= {"g0_plus", "g0_minus", "dx_plus", "dx_minus"}


def test_wkb_fit_structure(ens6):
    s = ml.small_eigs(ens6, 4.0, 1.5)
    v = s.vectors[:, s.of(ml.SLOW)[0]]
    fits = ml.wkb_amplitude_fit(ens6, v, 4.0, 1.5)
    assert len(fits) == 2
    assert sum(f.fraction for f in fits) <= 1 + 1e-12
    assert fits[0].fraction > 0.9
    dev = ml.phase_shift_deviation(ens6, v, 4.0, 1.5)
    assert 0 <= dev <= np.pi
