"""Dense eigendecompositions with residual certificates.

Two backends are available for both the Hermitian matrix ``A(x, t)`` and the
non-Hermitian matrix ``C(t)``:

``"lapack"``
    ``scipy.linalg.eigh`` / ``scipy.linalg.eig``.
``"builtin"``
    Householder tridiagonalization followed by implicit QL (Hermitian) or
    Householder reduction to Hessenberg form followed by shifted complex QR
    and triangular back-substitution (general).  Pure numpy, intended for
    small ``N`` and as an independent cross-check.

Every decomposition is accepted only if its residual certificate holds.
Eigenvectors are normalized to unit length with the largest-modulus
component made real and positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .ensemble import Ensemble, build_A, build_B, build_C

__all__ = [
    "SpectralError",
    "ConvergenceError",
    "CertificateError",
    "HermitianSpectrum",
    "ComplexSpectrum",
    "eig_hermitian",
    "eig_general",
    "eig_A",
    "eig_C",
    "alpha_velocities",
    "mu_nu_from_vectors",
    "track_sweep",
    "RESIDUAL_TOL",
    "ORTHO_TOL",
]

RESIDUAL_TOL = 1e-10
ORTHO_TOL = 1e-10
DEFECTIVE_TOL = 1e-8


class SpectralError(RuntimeError):
    """Base class for decomposition failures."""


class ConvergenceError(SpectralError):
    """The iterative eigensolver did not converge."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class CertificateError(SpectralError):
    """A residual or orthonormality certificate failed."""


@dataclass(frozen=True, eq=False)
class HermitianSpectrum:
    """Real eigenvalues (ascending) and orthonormal eigenvectors (columns)."""

    alpha: np.ndarray
    vectors: np.ndarray
    residual: float
    orthonormality: float
    norm: float
    backend: str = "lapack"

    @property
    def N(self) -> int:
        return int(self.alpha.size)


@dataclass(frozen=True, eq=False)
class ComplexSpectrum:
    """Complex eigenvalues sorted by (Re, Im) with unit right eigenvectors.

    ``vectors`` is ``None`` when only eigenvalues were requested; the
    certificate is then the trace identity.
    """

    sigma: np.ndarray
    vectors: Optional[np.ndarray]
    residual: float
    norm: float
    min_spacing: float
    backend: str = "lapack"
    flags: tuple = field(default_factory=tuple)

    @property
    def N(self) -> int:
        return int(self.sigma.size)

    @property
    def mu(self) -> np.ndarray:
        return self.sigma.real

    @property
    def nu(self) -> np.ndarray:
        return self.sigma.imag

    @property
    def near_defective(self) -> bool:
        return "near-defective" in self.flags


# {{{ helpers

def _fix_phase(V: np.ndarray) -> np.ndarray:
    """Unit columns with the largest-modulus entry real positive."""
    V = V / np.linalg.norm(V, axis=0)
    idx = np.argmax(np.abs(V), axis=0)
    piv = V[idx, np.arange(V.shape[1])]
    return V * (np.abs(piv) / piv)


def _residual(M: np.ndarray, vals: np.ndarray, V: np.ndarray) -> float:
    R = M @ V - V * vals
    return float(np.max(np.linalg.norm(R, axis=0))) if vals.size else 0.0


def _householder(x: np.ndarray):
    """Unit ``v`` and ``beta`` with ``(I - 2 v v^H) x = beta e_1``."""
    nx = np.linalg.norm(x)
    if nx == 0.0:
        return None, 0.0
    x0 = x[0]
    ph = x0 / abs(x0) if x0 != 0 else 1.0
    beta = -ph * nx
    v = x.astype(complex)
    v[0] -= beta
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return None, beta
    return v / nv, beta

# }}}


# {{{ builtin Hermitian: tridiagonalize + implicit QL

def _tridiagonalize(A: np.ndarray):
    """``A = Q T Q^H`` with ``T`` Hermitian tridiagonal (real diagonal)."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        v, _ = _householder(A[k + 1:, k])
        if v is None:
            continue
        s = slice(k + 1, None)
        A[s, k:] -= 2.0 * np.outer(v, v.conj() @ A[s, k:])
        A[k:, s] -= 2.0 * np.outer(A[k:, s] @ v, v.conj())
        Q[:, s] -= 2.0 * np.outer(Q[:, s] @ v, v.conj())
    d = A.diagonal().real.copy()
    e = np.diagonal(A, -1).copy()
    return d, e, Q


def _tql(d: np.ndarray, e: np.ndarray, Z: np.ndarray, max_iter: int = 60):
    """Implicit QL with Wilkinson shifts on a real symmetric tridiagonal.

    ``d`` diagonal, ``e`` subdiagonal (length n-1).  ``Z`` columns are rotated
    in place so that they become the eigenvectors.
    """
    n = d.size
    d = d.copy()
    e = np.append(e.astype(float), 0.0)
    total = 0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise ConvergenceError("tridiagonal QL did not converge", total)
            it += 1
            total += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi1 = Z[:, i + 1].copy()
                Z[:, i + 1] = s * Z[:, i] + c * zi1
                Z[:, i] = c * Z[:, i] - s * zi1
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d


def _eigh_builtin(A: np.ndarray):
    n = A.shape[0]
    if n == 1:
        return A.diagonal().real.copy(), np.ones((1, 1), dtype=complex)
    d, e, Q = _tridiagonalize(A)
    # diagonal unitary similarity making the subdiagonal real nonnegative
    tau = np.ones(n, dtype=complex)
    for k in range(n - 1):
        a = abs(e[k])
        tau[k + 1] = tau[k] * (e[k] / a if a > 0 else 1.0)
    Z = np.eye(n)
    w = _tql(d, np.abs(e), Z)
    V = (Q * tau) @ Z
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]

# }}}


# {{{ builtin general: Hessenberg + shifted complex QR

def _hessenberg(C: np.ndarray):
    H = np.array(C, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        v, _ = _householder(H[k + 1:, k])
        if v is None:
            continue
        s = slice(k + 1, None)
        H[s, :] -= 2.0 * np.outer(v, v.conj() @ H[s, :])
        H[:, s] -= 2.0 * np.outer(H[:, s] @ v, v.conj())
        Q[:, s] -= 2.0 * np.outer(Q[:, s] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H, Q


def _schur_qr(H: np.ndarray, Z: np.ndarray, max_iter: int = 50):
    """Complex Schur form by explicitly shifted QR with Givens rotations."""
    n = H.shape[0]
    scale = max(np.linalg.norm(H), np.finfo(float).tiny)
    eps = np.finfo(float).eps
    hi = n - 1
    it = 0
    total = 0
    while hi > 0:
        l = hi
        while l > 0:
            tol = eps * (abs(H[l, l]) + abs(H[l - 1, l - 1]))
            if tol == 0.0:
                tol = eps * scale
            if abs(H[l, l - 1]) <= tol:
                break
            l -= 1
        if l == hi:
            H[hi, hi - 1] = 0.0
            hi -= 1
            it = 0
            continue
        if l > 0:
            H[l, l - 1] = 0.0
        if it == max_iter:
            raise ConvergenceError("Hessenberg QR did not converge", total)
        it += 1
        total += 1
        a, b = H[hi - 1, hi - 1], H[hi - 1, hi]
        c, d = H[hi, hi - 1], H[hi, hi]
        if it % 11 == 10:
            shift = d + abs(c)  # exceptional shift
        else:
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            r1, r2 = 0.5 * (a + d) + disc, 0.5 * (a + d) - disc
            shift = r1 if abs(r1 - d) < abs(r2 - d) else r2
        idx = np.arange(l, hi + 1)
        H[idx, idx] -= shift
        rots = []
        for k in range(l, hi):
            x, y = H[k, k], H[k + 1, k]
            r = np.hypot(abs(x), abs(y))
            if r == 0.0:
                cs, sn = 1.0 + 0j, 0j
            else:
                cs, sn = x / r, y / r
            row_k = H[k, k:].copy()
            row_k1 = H[k + 1, k:]
            H[k, k:] = cs.conjugate() * row_k + sn.conjugate() * row_k1
            H[k + 1, k:] = -sn * row_k + cs * row_k1
            rots.append((k, cs, sn))
        for k, cs, sn in rots:
            top = min(k + 2, hi) + 1
            col_k = H[:top, k].copy()
            col_k1 = H[:top, k + 1]
            H[:top, k] = col_k * cs + col_k1 * sn
            H[:top, k + 1] = -col_k * sn.conjugate() + col_k1 * cs.conjugate()
            zk = Z[:, k].copy()
            zk1 = Z[:, k + 1]
            Z[:, k] = zk * cs + zk1 * sn
            Z[:, k + 1] = -zk * sn.conjugate() + zk1 * cs.conjugate()
        H[idx, idx] += shift
    return np.triu(H), Z


def _triangular_eigvecs(T: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    w = T.diagonal()
    small = np.finfo(float).eps * max(np.linalg.norm(T), np.finfo(float).tiny)
    Y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        Y[k, k] = 1.0
        for i in range(k - 1, -1, -1):
            den = T[i, i] - w[k]
            if abs(den) < small:
                den = small
            Y[i, k] = -(T[i, i + 1:k + 1] @ Y[i + 1:k + 1, k]) / den
    return Y


def _eig_builtin(C: np.ndarray, vectors: bool):
    n = C.shape[0]
    if n == 1:
        return C.diagonal().astype(complex), np.ones((1, 1), dtype=complex)
    H, Q = _hessenberg(C)
    T, Z = _schur_qr(H, Q)
    w = T.diagonal().copy()
    if not vectors:
        return w, None
    return w, Z @ _triangular_eigvecs(T)

# }}}


def eig_hermitian(A: np.ndarray, *, backend: str = "lapack",
                  tol: float = RESIDUAL_TOL) -> HermitianSpectrum:
    """Certified eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    A : ndarray, shape (N, N)
    backend : {"lapack", "builtin"}
    tol : float
        Residual and orthonormality tolerance (relative to ``||A||_F`` for
        the residual).

    Raises
    ------
    ConvergenceError, CertificateError
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    nrm = float(np.linalg.norm(A))
    if np.max(np.abs(A - A.conj().T), initial=0.0) > 1e-12 * max(nrm, 1.0):
        raise ValueError("A is not Hermitian")
    if backend == "lapack":
        try:
            w, V = sla.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc), -1) from exc
    elif backend == "builtin":
        w, V = _eigh_builtin(A)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    V = _fix_phase(V)
    res = _residual(A, w, V)
    ortho = float(np.max(np.abs(V.conj().T @ V - np.eye(w.size)), initial=0.0))
    if res > tol * max(nrm, np.finfo(float).tiny) and res > 0:
        raise CertificateError(f"Hermitian residual {res:.3e} exceeds {tol:g}*||A||_F={tol * nrm:.3e}")
    if ortho > tol:
        raise CertificateError(f"orthonormality defect {ortho:.3e} exceeds {tol:g}")
    w.setflags(write=False)
    V.setflags(write=False)
    return HermitianSpectrum(w, V, res, ortho, nrm, backend)


def eig_general(C: np.ndarray, *, backend: str = "lapack", vectors: bool = True,
                tol: float = RESIDUAL_TOL) -> ComplexSpectrum:
    """Certified eigendecomposition of a general complex matrix.

    Eigenvalues are sorted by real part, ties broken by imaginary part.  A
    ``"near-defective"`` flag is raised when two eigenvalues are closer than
    ``1e-8 ||C||_F``.  With ``vectors=False`` the certificate is the trace
    identity ``|sum(sigma) - tr C| <= tol * ||C||_F``.
    """
    C = np.asarray(C, dtype=complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("C must be square")
    nrm = float(np.linalg.norm(C))
    if backend == "lapack":
        try:
            if vectors:
                w, V = sla.eig(C)
            else:
                w, V = sla.eigvals(C), None
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc), -1) from exc
    elif backend == "builtin":
        w, V = _eig_builtin(C, vectors)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if V is not None:
        V = _fix_phase(V[:, order])
        res = _residual(C, w, V)
    else:
        res = float(abs(w.sum() - np.trace(C)))
    if res > tol * max(nrm, np.finfo(float).tiny) and res > 0:
        raise CertificateError(f"general residual {res:.3e} exceeds {tol:g}*||C||_F={tol * nrm:.3e}")
    if w.size > 1:
        gaps = np.abs(w[:, None] - w[None, :])
        np.fill_diagonal(gaps, np.inf)
        spacing = float(gaps.min())
    else:
        spacing = np.inf
    flags = ("near-defective",) if spacing < DEFECTIVE_TOL * nrm else ()
    w.setflags(write=False)
    if V is not None:
        V.setflags(write=False)
    return ComplexSpectrum(w, V, res, nrm, spacing, backend, flags)


def eig_A(ens: Ensemble, x: float, t: float, **kw) -> HermitianSpectrum:
    """Certified spectrum of ``A(x, t)``."""
    return eig_hermitian(build_A(ens, x, t), **kw)


def eig_C(ens: Ensemble, t: float, **kw) -> ComplexSpectrum:
    """Certified spectrum of ``C(t)``."""
    return eig_general(build_C(ens, t), **kw)


def alpha_velocities(spectrum: HermitianSpectrum, ens: Ensemble):
    """Eigenvalue velocities from eigenvectors.

    Returns
    -------
    alpha_x, alpha_t : ndarray
        ``sum_j (-2 lam_j) |v_kj|^2`` and ``sum_j (-4 lam_j^2) |v_kj|^2``.
    """
    P = np.abs(spectrum.vectors) ** 2
    lam = ens.lam
    return (-2.0 * lam) @ P, (-4.0 * lam * lam) @ P


def mu_nu_from_vectors(spectrum: ComplexSpectrum, ens: Ensemble, t: float,
                       tol: float = 1e-8):
    """Real and imaginary parts of ``sigma_k`` recomputed from eigenvectors.

    ``nu_k = -(eps/2) sum_j |w_kj|^2 / lam_j`` and ``mu_k = w_k^H B(t) w_k``.

    Returns
    -------
    mu, nu : ndarray
    ill_conditioned : ndarray of bool
        Indices where either value differs from ``sigma_k`` by more than
        ``tol`` (relative to ``max(1, |sigma_k|)``).
    """
    if spectrum.vectors is None:
        raise SpectralError("eigenvectors are required")
    W = spectrum.vectors
    P = np.abs(W) ** 2
    nu = -(ens.epsilon / 2.0) * ((1.0 / ens.lam) @ P)
    mu = np.real(np.einsum("jk,jl,lk->k", W.conj(), build_B(ens, t), W))
    scale = np.maximum(1.0, np.abs(spectrum.sigma))
    bad = (np.abs(mu - spectrum.mu) > tol * scale) | (np.abs(nu - spectrum.nu) > tol * scale)
    return mu, nu, bad


def track_sweep(ens: Ensemble, xs, t: float, **kw):
    """Eigenvalue curves of ``A(x, t)`` along an x-sweep.

    Consecutive spectra are matched by optimal assignment on the distance
    between each new eigenvalue and the linear prediction
    ``alpha + alpha_x dx`` from the previous point.

    Returns
    -------
    alpha, alpha_x : ndarray, shape (len(xs), N)
        Column ``k`` follows a single curve.
    """
    xs = np.asarray(xs, dtype=float)
    out_a = np.empty((xs.size, ens.N))
    out_v = np.empty((xs.size, ens.N))
    A = None
    prev = None
    for i, x in enumerate(xs):
        A = build_A(ens, x, t, out=A)
        sp = eig_hermitian(A, **kw)
        ax, _ = alpha_velocities(sp, ens)
        if prev is None:
            perm = np.arange(ens.N)
        else:
            pa, pv, px = prev
            pred = pa + pv * (x - px)
            cost = np.abs(pred[:, None] - sp.alpha[None, :]) + 1e-3 * np.abs(pv[:, None] - ax[None, :])
            _, perm = linear_sum_assignment(cost)
        out_a[i] = sp.alpha[perm]
        out_v[i] = ax[perm]
        prev = (out_a[i], out_v[i], x)
    return out_a, out_v
