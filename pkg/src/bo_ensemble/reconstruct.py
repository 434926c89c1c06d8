"""Reconstruction of ``u(x, t)`` from the ensemble.

Three exact routes are provided:

``ALPHA``
    ``u = sum_k 2 eps^2 alpha_x,k / (alpha_k^2 + eps^2)`` from the spectrum of
    the Hermitian matrix ``A(x, t)``.
``SIGMA``
    ``u = sum_k 2 eps nu_k / ((x - mu_k)^2 + nu_k^2)`` from the spectrum of
    ``C(t)`` (one decomposition per ``t``, O(N) per ``x``).
``LOGDET``
    ``u = 2 eps Im d/dx log det(I + i A / eps)`` by central differences
    (small ``N`` cross-check only).

The Calogero-Moser flow of ``sigma_k(t)`` is integrated by ``cm_flow``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import linear_sum_assignment

from .ensemble import Ensemble, build_A
from .spectral import (ComplexSpectrum, HermitianSpectrum, alpha_velocities, eig_C,
                       eig_hermitian)

__all__ = [
    "ReconstructError",
    "CollisionError",
    "ProfileSample",
    "u_from_alphas",
    "u_from_sigmas",
    "hilbert_u",
    "antiderivative_I",
    "u_alpha",
    "u_logdet_fd",
    "u_from_logdet_fd",
    "fd_step",
    "sample",
    "analytic_mass",
    "truncation_bound",
    "cm_rhs",
    "CMResult",
    "cm_flow",
    "match_spectra",
]

ROUTES = ("ALPHA", "SIGMA", "LOGDET")


class ReconstructError(RuntimeError):
    """Reconstruction failure."""


class CollisionError(ReconstructError):
    """Two Calogero-Moser particles came closer than the collision tolerance."""


@dataclass(frozen=True, eq=False)
class ProfileSample:
    """``u`` on an x-grid, optionally split into upper/lower/outlier parts."""

    x: np.ndarray
    u: np.ndarray
    route: str
    epsilon: float
    t: float
    u_U: Optional[np.ndarray] = None
    u_L: Optional[np.ndarray] = None
    u_o: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.route not in ROUTES:
            raise ValueError(f"route must be one of {ROUTES}")
        if not np.all(np.isfinite(self.u)):
            raise ReconstructError("non-finite u values")

    def to_csv(self) -> str:
        """CSV with columns x, u, u_U, u_L, u_o, route, epsilon, t."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "u", "u_U", "u_L", "u_o", "route", "epsilon", "t"])
        nan = np.full(self.x.shape, np.nan)
        cols = [c if c is not None else nan for c in (self.u_U, self.u_L, self.u_o)]
        for i in range(self.x.size):
            w.writerow([f"{self.x[i]:.16e}", f"{self.u[i]:.16e}",
                        *(f"{c[i]:.16e}" for c in cols),
                        self.route, f"{self.epsilon:.16e}", f"{self.t:.16e}"])
        return buf.getvalue()


# {{{ the three routes

def u_from_alphas(spectrum: HermitianSpectrum, alpha_x: np.ndarray, eps: float,
                  cutoff: Optional[float] = None) -> float:
    """``sum_k 2 eps^2 alpha_x,k / (alpha_k^2 + eps^2)``.

    Terms with ``|alpha_k| >= cutoff`` are dropped when ``cutoff`` is given.
    """
    a = spectrum.alpha
    terms = 2.0 * eps * eps * alpha_x / (a * a + eps * eps)
    if cutoff is not None:
        terms = terms[np.abs(a) < cutoff]
    return float(np.sum(terms))


def u_from_sigmas(sigma, eps: float, x) -> np.ndarray:
    """Sum of Lorentzians ``2 eps nu / ((x - mu)^2 + nu^2)`` at each ``x``."""
    sigma = sigma.sigma if isinstance(sigma, ComplexSpectrum) else np.asarray(sigma)
    x = np.asarray(x, dtype=float)
    dx = x[..., None] - sigma.real
    nu = sigma.imag
    return np.sum(2.0 * eps * nu / (dx * dx + nu * nu), axis=-1)


def hilbert_u(sigma, eps: float, x) -> np.ndarray:
    """Hilbert transform companion ``sum -2 eps (x - mu) / ((x - mu)^2 + nu^2)``."""
    sigma = sigma.sigma if isinstance(sigma, ComplexSpectrum) else np.asarray(sigma)
    x = np.asarray(x, dtype=float)
    dx = x[..., None] - sigma.real
    nu = sigma.imag
    return np.sum(-2.0 * eps * dx / (dx * dx + nu * nu), axis=-1)


def antiderivative_I(spectrum: HermitianSpectrum, eps: float) -> float:
    """``I = 2 eps sum_k arctan(alpha_k / eps)`` (principal branch)."""
    return float(2.0 * eps * np.sum(np.arctan(spectrum.alpha / eps)))


def u_alpha(ens: Ensemble, x: float, t: float, cutoff: Optional[float] = None,
            **kw) -> float:
    """ALPHA route at a single point."""
    sp = eig_hermitian(build_A(ens, x, t), **kw)
    ax, _ = alpha_velocities(sp, ens)
    return u_from_alphas(sp, ax, ens.epsilon, cutoff)


def fd_step(eps: float) -> float:
    """Finite-difference step ``max(1e-5, 1e-3 eps)``."""
    return max(1e-5, 1e-3 * eps)


def _logdet(M: np.ndarray) -> complex:
    lu, piv = sla.lu_factor(M, check_finite=False)
    diag = np.diag(lu)
    if np.any(diag == 0):
        raise np.linalg.LinAlgError("singular pivot")
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    return complex(np.sum(np.log(diag)) + 1j * np.pi * (swaps % 2))


def u_logdet_fd(ens: Ensemble, x: float, t: float, h: Optional[float] = None,
                rng: Optional[np.random.Generator] = None, retries: int = 3) -> float:
    """LOGDET route: ``2 eps Im [log det M(x+h) - log det M(x-h)] / (2h)``.

    ``M = I + i A / eps``.  The two log-determinants are accumulated from
    the LU diagonals; their difference is reduced to the branch nearest zero,
    which is exact for steps small enough that the argument changes by less
    than ``pi``.  A singular pivot triggers a retry with a jittered step.
    """
    if ens.N > 64:
        raise ReconstructError("LOGDET route is restricted to N <= 64")
    eps = ens.epsilon
    h = fd_step(eps) if h is None else h
    rng = rng if rng is not None else np.random.default_rng(0)
    I = np.eye(ens.N)
    for _ in range(retries + 1):
        try:
            lp = _logdet(I + 1j * build_A(ens, x + h, t) / eps)
            lm = _logdet(I + 1j * build_A(ens, x - h, t) / eps)
        except np.linalg.LinAlgError:
            h *= 1.0 + 0.1 * rng.random()
            continue
        dphase = np.angle(np.exp(1j * (lp.imag - lm.imag)))
        return float(2.0 * eps * dphase / (2.0 * h))
    raise ReconstructError("LU pivots singular after jittered retries")


u_from_logdet_fd = u_logdet_fd


def sample(ens: Ensemble, xs, t: float, route: str = "SIGMA",
           spectrum: Optional[ComplexSpectrum] = None) -> ProfileSample:
    """Evaluate ``u`` on a grid by the chosen route."""
    xs = np.asarray(xs, dtype=float)
    if route == "SIGMA":
        sp = spectrum if spectrum is not None else eig_C(ens, t, vectors=False)
        u = u_from_sigmas(sp, ens.epsilon, xs)
    elif route == "ALPHA":
        u = np.empty_like(xs)
        A = None
        for i, x in enumerate(xs):
            A = build_A(ens, x, t, out=A)
            sp = eig_hermitian(A)
            ax, _ = alpha_velocities(sp, ens)
            u[i] = u_from_alphas(sp, ax, ens.epsilon)
    elif route == "LOGDET":
        u = np.array([u_logdet_fd(ens, x, t) for x in xs])
    else:
        raise ValueError(f"route must be one of {ROUTES}")
    return ProfileSample(xs, u, route, ens.epsilon, float(t))


def analytic_mass(ens: Ensemble) -> float:
    """``int u dx = 2 pi eps N`` (each Lorentzian carries ``2 pi eps``)."""
    return 2.0 * np.pi * ens.epsilon * ens.N


def truncation_bound(L: float, N: int, eps: float, r: float) -> float:
    """Bound ``4 L N eps^(2 - 2r)`` on the terms with ``|alpha| >= eps^r``."""
    return 4.0 * L * N * eps ** (2.0 - 2.0 * r)

# }}}


# {{{ Calogero-Moser flow

def cm_rhs(sigma: np.ndarray, eps: float, collision_tol: float = 1e-10) -> np.ndarray:
    """``sigma_k' = sum_j 2i eps/(sigma_k - conj sigma_j) - sum_{j!=k} 2i eps/(sigma_k - sigma_j)``."""
    diff = sigma[:, None] - sigma[None, :]
    np.fill_diagonal(diff, np.inf)
    if np.min(np.abs(diff)) < collision_tol:
        raise CollisionError("particles closer than collision tolerance")
    conj = sigma[:, None] - sigma.conj()[None, :]
    return 2j * eps * (np.sum(1.0 / conj, axis=1) - np.sum(1.0 / diff, axis=1))


@dataclass(frozen=True, eq=False)
class CMResult:
    """Calogero-Moser trajectory and its check against direct decomposition."""

    t: np.ndarray
    sigma: np.ndarray  # shape (len(t), N)
    direct: Optional[np.ndarray]
    deviation: Optional[float]
    nfev: int

    @property
    def final(self) -> np.ndarray:
        return self.sigma[-1]


def match_spectra(a: np.ndarray, b: np.ndarray):
    """Optimal assignment between two eigenvalue sets.

    Returns
    -------
    perm : ndarray
        ``b[perm]`` is matched to ``a``.
    max_dev : float
    """
    cost = np.abs(a[:, None] - b[None, :])
    _, perm = linear_sum_assignment(cost)
    return perm, float(np.max(np.abs(a - b[perm]))) if a.size else 0.0


def cm_flow(ens: Ensemble, t0: float, t1: float, tol: float = 1e-10,
            sigma0: Optional[np.ndarray] = None, t_eval=None,
            check: bool = True, collision_tol: float = 1e-10) -> CMResult:
    """Integrate the Calogero-Moser system from ``t0`` to ``t1``.

    Uses the embedded 8(5,3) Runge-Kutta pair (DOP853) on the real-split
    state with ``rtol = atol = tol``.  Starting values default to the
    spectrum of ``C(t0)``; with ``check`` the endpoint is matched against the
    spectrum of ``C(t1)`` by optimal assignment.
    """
    eps = ens.epsilon
    if sigma0 is None:
        sigma0 = eig_C(ens, t0, vectors=False).sigma
    sigma0 = np.asarray(sigma0, dtype=complex)
    n = sigma0.size

    def rhs(_t, z):
        d = cm_rhs(z[:n] + 1j * z[n:], eps, collision_tol)
        return np.concatenate([d.real, d.imag])

    z0 = np.concatenate([sigma0.real, sigma0.imag])
    sol = solve_ivp(rhs, (t0, t1), z0, method="DOP853", rtol=tol, atol=tol,
                    t_eval=t_eval)
    if not sol.success:
        raise ReconstructError(f"Calogero-Moser integration failed: {sol.message}")
    traj = (sol.y[:n] + 1j * sol.y[n:]).T
    if t_eval is None:
        traj = traj[[0, -1]]
        times = np.array([t0, t1])
    else:
        times = sol.t
    direct = dev = None
    if check:
        direct = eig_C(ens, t1, vectors=False).sigma
        perm, dev = match_spectra(traj[-1], direct)
        direct = direct[perm]
    return CMResult(times, traj, direct, dev, int(sol.nfev))

# }}}
