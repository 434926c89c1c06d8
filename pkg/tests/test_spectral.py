import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bo_ensemble.ensemble import build_B, build_C, quantize
from bo_ensemble.profile import lorentzian
from bo_ensemble.spectral import (
    CertificateError,
    alpha_velocities,
    eig_A,
    eig_C,
    eig_general,
    eig_hermitian,
    mu_nu_from_vectors,
    track_sweep,
)

BACKENDS = ["lapack", "builtin"]


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (M + M.conj().T) / 2


def random_complex(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 24), seed=st.integers(0, 2 ** 32 - 1))
def test_hermitian_backends_agree(n, seed):
    A = random_hermitian(n, seed)
    a = eig_hermitian(A, backend="lapack")
    b = eig_hermitian(A, backend="builtin")
    ref = np.linalg.eigvalsh(A)
    np.testing.assert_allclose(a.alpha, ref, atol=1e-12 * max(1, np.abs(ref).max()))
    np.testing.assert_allclose(b.alpha, ref, atol=1e-11 * max(1, np.abs(ref).max()))
    for sp in (a, b):
        V = sp.vectors
        np.testing.assert_allclose(A @ V, V * sp.alpha, atol=1e-10 * max(1, sp.norm))
        np.testing.assert_allclose(V.conj().T @ V, np.eye(n), atol=1e-11)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 20), seed=st.integers(0, 2 ** 32 - 1))
def test_general_backends_agree(n, seed):
    C = random_complex(n, seed)
    a = eig_general(C, backend="lapack")
    b = eig_general(C, backend="builtin")
    np.testing.assert_allclose(b.sigma, a.sigma, atol=1e-9 * max(1.0, a.norm))
    for sp in (a, b):
        # trace and determinant invariants
        assert np.sum(sp.sigma) == pytest.approx(np.trace(C), abs=1e-10 * sp.norm)
        W = sp.vectors
        np.testing.assert_allclose(C @ W, W * sp.sigma, atol=1e-9 * max(1, sp.norm))
        np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-12)


def test_general_sorted_by_real_part():
    sp = eig_general(random_complex(12, 3))
    key = list(zip(sp.mu, sp.nu))
    assert key == sorted(key)


def test_eigenvalues_only_certificate():
    C = random_complex(10, 7)
    sp = eig_general(C, vectors=False)
    assert sp.vectors is None
    assert sp.residual <= 1e-10


def test_phase_convention():
    sp = eig_hermitian(random_hermitian(8, 1))
    V = sp.vectors
    k = np.argmax(np.abs(V), axis=0)
    pivots = V[k, np.arange(V.shape[1])]
    np.testing.assert_allclose(pivots.imag, 0.0, atol=1e-14)
    assert np.all(pivots.real > 0)


def test_nonfinite_input_rejected():
    A = np.eye(3)
    A[0, 0] = np.nan
    with pytest.raises((CertificateError, ValueError)):
        eig_hermitian(A)


def test_near_defective_flag():
    C = np.array([[1.0, 1.0], [0.0, 1.0 + 1e-12]], dtype=complex)
    assert eig_general(C, vectors=False).near_defective


@pytest.mark.parametrize("backend", BACKENDS)
def test_ensemble_spectrum_backends(ens5, backend):
    ref = eig_C(ens5, 1.5, backend="lapack")
    sp = eig_C(ens5, 1.5, backend=backend)
    np.testing.assert_allclose(sp.sigma, ref.sigma, atol=1e-11)
    assert np.all(sp.nu > 0)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.5])
def test_imaginary_parts_bounded_by_weighted_average(ens5, t):
    # nu_k is a convex combination of eps / (2 |lam_j|)
    sp = eig_C(ens5, t)
    lo = ens5.epsilon / (2 * ens5.L)
    hi = ens5.epsilon / (2 * abs(ens5.lam[-1]))
    assert np.all(sp.nu >= lo * (1 - 1e-12))
    assert np.all(sp.nu <= hi * (1 + 1e-12))


@pytest.mark.parametrize("t", [0.0, 1.5])
def test_mu_nu_from_vectors(ens5, t):
    sp = eig_C(ens5, t)
    mu, nu, bad = mu_nu_from_vectors(sp, ens5, t)
    assert not bad.any()
    np.testing.assert_allclose(mu, sp.mu, atol=1e-9)
    np.testing.assert_allclose(nu, sp.nu, atol=1e-9)


def test_trace_of_C(ens5):
    sp = eig_C(ens5, 1.5, vectors=False)
    assert np.sum(sp.sigma) == pytest.approx(np.trace(build_C(ens5, 1.5)), abs=1e-10)


@pytest.mark.parametrize("x", [-1.0, 2.0, 4.0, 7.5])
def test_alpha_x_matches_finite_differences(ens5, x):
    t, h = 1.5, 1e-6
    sp = eig_A(ens5, x, t)
    ax, at = alpha_velocities(sp, ens5)
    fdx = (eig_A(ens5, x + h, t).alpha - eig_A(ens5, x - h, t).alpha) / (2 * h)
    fdt = (eig_A(ens5, x, t + h).alpha - eig_A(ens5, x, t - h).alpha) / (2 * h)
    np.testing.assert_allclose(ax, fdx, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(at, fdt, rtol=1e-5, atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-5, 12), t=st.floats(0, 2.5))
def test_inertia_counts_eigenvalues_of_B(x, t):
    # A = D (x - B) D is congruent to x - B
    ens = quantize(lorentzian(), 2.0 ** -4)
    neg = int(np.count_nonzero(eig_A(ens, x, t).alpha < 0))
    assert neg == int(np.count_nonzero(np.linalg.eigvalsh(build_B(ens, t)) > x))


def test_track_sweep_follows_smooth_curves(ens5):
    xs = np.linspace(3.0, 5.0, 41)
    alpha, ax = track_sweep(ens5, xs, 1.5)
    assert alpha.shape == (41, ens5.N)
    # each tracked curve changes consistently with its velocity
    pred = alpha[:-1] + ax[:-1] * np.diff(xs)[:, None]
    assert np.max(np.abs(pred - alpha[1:])) < 0.05


@pytest.mark.parametrize("backend", BACKENDS)
def test_tightened_tolerance_fails_certificate(ens5, backend):
    # negative control: roundoff-level residuals cannot meet a 1e-18 tolerance
    from bo_ensemble.ensemble import build_A
    with pytest.raises(CertificateError):
        eig_hermitian(build_A(ens5, 4.0, 1.5), backend=backend, tol=1e-18)
