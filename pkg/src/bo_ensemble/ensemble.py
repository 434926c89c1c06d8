"""Quantized soliton data and the matrices built from it.

Given a profile and a dispersion parameter ``eps``, the ensemble has
``N = floor(M / eps)`` eigenvalues ``lam_j = Lambda(eps (j - 1/2))`` and phases
``gamma_j = gamma(lam_j)``.  From these we assemble

* ``A(x, t)``  Hermitian,  ``A_jk = 2 i eps sqrt(lam_j lam_k) / (lam_j - lam_k)``,
  ``A_jj = -2 lam_j (x + 2 lam_j t + gamma_j)``;
* ``D = diag(sqrt(-2 lam_j))``;
* ``B(t)``  Hermitian,  ``B_jk = -i eps / (lam_j - lam_k)``, ``B_jj = -2 lam_j t - gamma_j``;
* ``C(t) = B(t) + i eps D^-2`` (non-Hermitian, independent of ``x``).

They are related by ``A = D (x I - B) D`` and
``I + i A / eps = (i / eps) D (x I - C) D``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .profile import Profile, get_profile, lambda_map, phase

__all__ = [
    "EnsembleError",
    "Ensemble",
    "quantize",
    "build_A",
    "build_B",
    "build_C",
    "build_D",
    "A_diagonal",
    "factorization_error",
    "count_in_interval",
]


class EnsembleError(ValueError):
    """Raised for invalid ensemble parameters."""


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Quantized eigenvalues and phases for a fixed ``eps``.

    Attributes
    ----------
    profile : Profile
    epsilon : float
    lam : ndarray, shape (N,)
        Strictly increasing values in ``(-L, 0)``.
    gamma : ndarray, shape (N,)
    """

    profile: Profile
    epsilon: float
    lam: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        gam = np.asarray(self.gamma, dtype=float)
        if lam.ndim != 1 or lam.shape != gam.shape or lam.size == 0:
            raise EnsembleError("lam and gamma must be equal-length nonempty vectors")
        if np.any(np.diff(lam) <= 0):
            raise EnsembleError("eigenvalues must be strictly increasing")
        if lam[0] <= -self.profile.peak or lam[-1] >= 0:
            raise EnsembleError("eigenvalues must lie in (-L, 0)")
        lam.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gam)

    @property
    def N(self) -> int:
        return int(self.lam.size)

    @property
    def L(self) -> float:
        return self.profile.peak

    @property
    def y(self) -> np.ndarray:
        """Rescaled index ``y_j = eps (j - 1/2)``."""
        return self.epsilon * (np.arange(1, self.N + 1) - 0.5)

    @property
    def d(self) -> np.ndarray:
        """Diagonal of ``D``: ``sqrt(-2 lam_j)``."""
        return np.sqrt(-2.0 * self.lam)

    def quantization_residual(self) -> float:
        """``max_j |Y(lam_j) - eps (j - 1/2)|``."""
        lmap = lambda_map(self.profile)
        return float(np.max(np.abs(lmap.cumulative(self.lam) - self.y)))

    def last_gap(self) -> float:
        """``int_{lam_N}^0 F``; equals ``eps / 2`` when ``eps = M / N``."""
        return float(lambda_map(self.profile).tail(self.lam[-1]))

    # serialization
    def to_dict(self) -> dict:
        return {
            "profile": {"name": self.profile.name, "params": dict(self.profile.params)},
            "epsilon": self.epsilon,
            "N": self.N,
            "lambda": self.lam.tolist(),
            "gamma": self.gamma.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict, profile: Optional[Profile] = None) -> "Ensemble":
        if profile is None:
            stored = data["profile"]
            params = {k: v for k, v in stored.get("params", {}).items() if k != "amplitude_factor"}
            profile = get_profile(stored["name"], **params)
        ens = cls(profile, float(data["epsilon"]), np.array(data["lambda"]), np.array(data["gamma"]))
        if ens.N != int(data["N"]):
            raise EnsembleError("N does not match the stored eigenvalue count")
        return ens

    @classmethod
    def from_json(cls, text: str, profile: Optional[Profile] = None) -> "Ensemble":
        return cls.from_dict(json.loads(text), profile)


def quantize(profile: Profile, epsilon: Optional[float] = None, *, N: Optional[int] = None,
             snap: bool = True) -> Ensemble:
    """Build the ensemble for ``eps`` (or for ``N`` with ``eps = M / N``).

    Parameters
    ----------
    profile : Profile
    epsilon : float, optional
        Dispersion parameter, ``0 < eps <= M``.
    N : int, optional
        Eigenvalue count; implies ``eps = M / N``.
    snap : bool
        Replace ``eps`` by ``M / N`` so that the last eigenvalue sits half a
        spacing below zero in the counting measure.

    Returns
    -------
    Ensemble
    """
    lmap = lambda_map(profile)
    M = lmap.mass
    if N is not None:
        if N < 1:
            raise EnsembleError("N must be positive")
        eps = M / N
    else:
        if epsilon is None or not np.isfinite(epsilon) or epsilon <= 0:
            raise EnsembleError("epsilon must be positive")
        # tolerate roundoff in M so that eps = M/N maps back to N
        N = int(np.floor(M / epsilon * (1 + 1e-12)))
        if N < 1:
            raise EnsembleError(f"epsilon={epsilon:g} exceeds M={M:g}: no eigenvalues")
        eps = M / N if snap else float(epsilon)
    y = eps * (np.arange(1, N + 1) - 0.5)
    if y[-1] >= M:
        raise EnsembleError("epsilon too large for N eigenvalues")
    lam = lmap(y)
    gam = phase(profile, lam)
    return Ensemble(profile, float(eps), lam, gam)


def count_in_interval(ens: Ensemble, a: float, b: float) -> tuple[int, float]:
    """Observed count of ``lam_j`` in ``(a, b)`` and the prediction ``eps^-1 int_a^b F``."""
    lmap = lambda_map(ens.profile)
    observed = int(np.count_nonzero((ens.lam > a) & (ens.lam < b)))
    predicted = float(lmap.cumulative(b) - lmap.cumulative(a)) / ens.epsilon
    return observed, predicted


# {{{ matrices

def _inverse_differences(lam: np.ndarray) -> np.ndarray:
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    inv = 1.0 / diff
    np.fill_diagonal(inv, 0.0)
    return inv


def A_diagonal(ens: Ensemble, x: float, t: float) -> np.ndarray:
    """Diagonal of ``A(x, t)``."""
    lam = ens.lam
    return -2.0 * lam * (x + 2.0 * lam * t + ens.gamma)


def build_A(ens: Ensemble, x: float, t: float, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Hermitian matrix ``A(x, t)``.

    If ``out`` holds a previous ``A`` for the same ensemble, only its diagonal
    is rewritten (cheap x-sweeps).
    """
    if out is None:
        lam = ens.lam
        root = np.sqrt(lam[:, None] * lam[None, :])
        out = 2j * ens.epsilon * root * _inverse_differences(lam)
    np.fill_diagonal(out, A_diagonal(ens, x, t))
    return out


def build_D(ens: Ensemble) -> np.ndarray:
    """Diagonal matrix ``D = diag(sqrt(-2 lam_j))``."""
    return np.diag(ens.d)


def build_B(ens: Ensemble, t: float) -> np.ndarray:
    """Hermitian matrix ``B(t)``."""
    B = -1j * ens.epsilon * _inverse_differences(ens.lam)
    np.fill_diagonal(B, -2.0 * ens.lam * t - ens.gamma)
    return B


def build_C(ens: Ensemble, t: float) -> np.ndarray:
    """Non-Hermitian matrix ``C(t) = B(t) + i eps D^-2``."""
    C = build_B(ens, t)
    C[np.diag_indices_from(C)] += 1j * ens.epsilon / (-2.0 * ens.lam)
    return C


def factorization_error(ens: Ensemble, x: float, t: float) -> float:
    """Relative Frobenius error of ``I + iA/eps = (i/eps) D (xI - C) D``."""
    A = build_A(ens, x, t)
    D = build_D(ens)
    I = np.eye(ens.N)
    lhs = I + 1j * A / ens.epsilon
    rhs = (1j / ens.epsilon) * D @ (x * I - build_C(ens, t)) @ D
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))

# }}}
