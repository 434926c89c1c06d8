import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bo_ensemble.ensemble import (
    Ensemble,
    EnsembleError,
    build_A,
    build_B,
    build_C,
    build_D,
    count_in_interval,
    factorization_error,
    quantize,
)
from bo_ensemble.profile import lambda_map, lorentzian


def test_count_and_ordering(ens6):
    assert ens6.N == 64
    assert np.all(np.diff(ens6.lam) > 0)
    assert -2.0 < ens6.lam[0] and ens6.lam[-1] < 0


def test_quantization_condition(ens6):
    assert ens6.quantization_residual() < 1e-12
    assert ens6.last_gap() == pytest.approx(ens6.epsilon / 2, rel=1e-9)


@pytest.mark.parametrize("k", [6, 7, 8, 9])
def test_edge_eigenvalue_scaling(lor, k):
    # tail of F ~ (sqrt 2 / pi) |lam|^-1/2 near zero gives lam_N = -pi^2 eps^2 / 32
    ens = quantize(lor, 2.0 ** -k)
    ratio = ens.lam[-1] / ens.epsilon ** 2
    assert ratio == pytest.approx(-np.pi ** 2 / 32, rel=2 ** -k * 4)


def test_quantize_by_count(lor):
    ens = quantize(lor, N=10)
    assert ens.N == 10
    assert ens.epsilon == pytest.approx(lor.mass / 10)


def test_quantize_rejects_bad_eps(lor):
    with pytest.raises((EnsembleError, ValueError)):
        quantize(lor, -0.1)
    with pytest.raises((EnsembleError, ValueError)):
        quantize(lor, 2.0)


def test_single_soliton(lor):
    ens = quantize(lor, N=1)
    assert ens.N == 1
    # Y(lam_1) = M / 2
    assert lambda_map(lor).cumulative(ens.lam[0]) == pytest.approx(0.5, rel=1e-10)
    C = build_C(ens, 0.7)
    assert C[0, 0] == pytest.approx(build_B(ens, 0.7)[0, 0] + 1j * ens.epsilon / (-2 * ens.lam[0]))


def test_ensemble_validation(lor):
    with pytest.raises(EnsembleError):
        Ensemble(lor, 0.5, np.array([-0.5, -1.0]), np.zeros(2))
    with pytest.raises(EnsembleError):
        Ensemble(lor, 0.5, np.array([-3.0, -1.0]), np.zeros(2))


def test_json_round_trip(ens5):
    back = Ensemble.from_json(ens5.to_json())
    np.testing.assert_array_equal(back.lam, ens5.lam)
    np.testing.assert_array_equal(back.gamma, ens5.gamma)
    assert back.epsilon == ens5.epsilon


def test_matrices_structure(ens5):
    B = build_B(ens5, 1.3)
    C = build_C(ens5, 1.3)
    D = build_D(ens5)
    assert np.allclose(B, B.conj().T)
    np.testing.assert_allclose(np.diag(D) ** 2, -2 * ens5.lam)
    np.testing.assert_allclose(C - B, 1j * ens5.epsilon * np.diag(1.0 / np.diag(D) ** 2), atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-10, 10), t=st.floats(0, 3))
def test_factorization_identity(x, t):
    ens = quantize(lorentzian(), 2.0 ** -4)
    A = build_A(ens, x, t)
    D = build_D(ens)
    expected = D @ (x * np.eye(ens.N) - build_B(ens, t)) @ D
    np.testing.assert_allclose(A, expected, atol=1e-12 * max(1.0, abs(x)))
    assert np.allclose(A, A.conj().T)
    assert factorization_error(ens, x, t) < 1e-13


def test_build_A_reuses_buffer(ens5):
    buf = build_A(ens5, 0.0, 0.5)
    out = build_A(ens5, 1.0, 0.5, out=buf)
    assert out is buf
    np.testing.assert_allclose(out, build_A(ens5, 1.0, 0.5))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-1.99, -0.01), w=st.floats(0.001, 1.0))
def test_count_in_interval(a, w):
    ens = quantize(lorentzian(), 2.0 ** -6)
    b = min(a + w, -1e-9)
    n, expected = count_in_interval(ens, a, b)
    assert n == int(np.count_nonzero((ens.lam >= a) & (ens.lam <= b)))
    # counting error is at most one eigenvalue per interval endpoint
    assert abs(n - expected) <= 2


def test_perturbed_eigenvalues_break_quantization_only(ens5):
    # negative control: a 1e-3 shift violates the quantization condition,
    # while the reconstruction routes stay mutually consistent
    from bo_ensemble.reconstruct import u_alpha, u_from_sigmas
    from bo_ensemble.spectral import eig_C

    bad = Ensemble(ens5.profile, ens5.epsilon, ens5.lam * (1 + 1e-3), ens5.gamma)
    assert ens5.quantization_residual() < 1e-12
    assert bad.quantization_residual() > 1e-5
    sig = float(u_from_sigmas(eig_C(bad, 1.0, vectors=False), bad.epsilon, 4.0))
    assert u_alpha(bad, 4.0, 1.0) == pytest.approx(sig, rel=1e-10)
