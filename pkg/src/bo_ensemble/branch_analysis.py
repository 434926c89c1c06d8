"""Structure of the spectrum of ``C(t)`` and the modulated periodic wave.

The eigenvalues ``sigma_k = mu_k + i nu_k`` of ``C(t)`` split into

* outliers: ``nu_k > c_out delta(eps)`` with ``|mu_k| <= B``;
* a lower branch (only for ``t > t_b``): ``nu_k < c_split delta(eps)`` with
  ``mu_k`` between the caustics;
* the upper branch: everything else,

where ``delta(eps) = eps ln(1/eps)``.  Sorting each branch by ``mu`` and
placing the ``k``-th point at ``y_k = (k - 1/2) / N_branch`` gives sampling
tables whose points condense onto smooth curves as ``eps -> 0``.  From these
tables the modulation fields

    psi_U = 2 pi eps N_U / mu_U'(y*),  psi_L = 2 pi eps N_L / mu_L'(y*),
    phi_L = psi_L nu_L(y*)

are built, with ``y*`` solving ``mu(y*) = x``, and the local wave

    u ~ psi_U + psi_L sinh(phi_L) / (cosh(phi_L) - cos(psi_L (x - x0) / eps + 2 pi p))

is compared with the exact ensemble.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from .burgers import branches, breaking_time, caustics
from .ensemble import quantize
from .profile import DomainError, Profile
from .reconstruct import u_from_sigmas
from .spectral import ComplexSpectrum, eig_C

__all__ = [
    "ClassificationError",
    "PhaseAnomaly",
    "ClassifyConfig",
    "BranchSets",
    "SamplingTable",
    "WhithamFields",
    "ExponentFit",
    "delta",
    "classify",
    "sampling_tables",
    "table_distance",
    "derivative_jump",
    "fit_exponents",
    "exponent_sweep",
    "modulation_fields",
    "whitham_targets",
    "periodic_profile",
    "wave_amplitude",
    "kernel",
    "fit_phase",
    "comb_sum",
    "comb_closed_form",
    "diagnostic_decompose",
]


class ClassificationError(RuntimeError):
    """Classification produced an empty upper branch."""


class PhaseAnomaly(RuntimeWarning):
    """The anchored phase fell outside ``[-0.55, 0.55]``."""


def delta(eps: float) -> float:
    """Upper-branch scale ``eps ln(1/eps)``."""
    return eps * np.log(1.0 / eps)


@dataclass(frozen=True)
class ClassifyConfig:
    """Thresholds for splitting the spectrum.

    ``B = B_bound (1 + B_growth t L)``; the default ``B_growth = 0`` keeps
    the outlier window independent of ``t``.
    """

    c_out: float = 100.0
    c_split: float = 0.5
    B_bound: float = 10.0
    B_growth: float = 0.0

    def __post_init__(self):
        if min(self.c_out, self.c_split, self.B_bound) <= 0 or self.B_growth < 0:
            raise ValueError("thresholds must be positive")

    def bound(self, t: float, L: float) -> float:
        return self.B_bound * (1.0 + self.B_growth * t * L)


@dataclass(frozen=True, eq=False)
class BranchSets:
    """Disjoint index sets (into ``spectrum.sigma``) for outliers, upper and lower branches."""

    S_o: np.ndarray
    S_U: np.ndarray
    S_L: np.ndarray
    nu_out: float
    nu_split: float
    B_bound: float
    epsilon: float
    t: float
    interval: Optional[tuple] = None

    @property
    def N_U(self) -> int:
        return int(self.S_U.size)

    @property
    def N_L(self) -> int:
        return int(self.S_L.size)

    @property
    def N_o(self) -> int:
        return int(self.S_o.size)


def classify(spectrum: ComplexSpectrum, eps: float, t: float, profile: Profile,
             config: ClassifyConfig = ClassifyConfig(),
             interval: Optional[tuple] = None) -> BranchSets:
    """Partition the eigenvalues of ``C(t)`` into outliers, upper and lower branches.

    Parameters
    ----------
    interval : (float, float), optional
        Caustic interval ``(X-, X+)``; computed from the profile when omitted.
    """
    mu, nu = spectrum.mu, spectrum.nu
    d = delta(eps)
    nu_out = config.c_out * d
    nu_split = config.c_split * d
    B = config.bound(t, profile.peak)
    out = (nu > nu_out) & (np.abs(mu) <= B)
    low = np.zeros_like(out)
    if t > breaking_time(profile):
        if interval is None:
            interval = caustics(profile, t)
        low = (~out) & (nu < nu_split) & (mu > interval[0]) & (mu < interval[1])
    up = ~(out | low)
    if not up.any():
        raise ClassificationError("empty upper branch: thresholds misconfigured")
    idx = np.arange(mu.size)
    return BranchSets(idx[out], idx[up], idx[low], nu_out, nu_split, B, float(eps),
                      float(t), interval)


# {{{ sampling tables

@dataclass(frozen=True, eq=False)
class SamplingTable:
    """Branch eigenvalues sorted by real part on the grid ``y_k = (k - 1/2) / n``.

    ``nu`` is rescaled by ``scale`` (``delta(eps)`` upper, ``eps`` lower).
    ``mu_prime`` and ``nu_prime`` hold the forward difference quotients
    ``(mu_{k+1} - mu_k) n`` (and likewise for the rescaled ``nu``) at
    ``y_k``, ``k = 1 .. n - 1``.
    """

    branch: str
    y: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    scale: float
    epsilon: float
    t: float

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def mu_prime(self) -> np.ndarray:
        return np.diff(self.mu) * self.n

    @property
    def nu_prime(self) -> np.ndarray:
        return np.diff(self.nu) * self.n

    def y_of_mu(self, x):
        """Monotone inverse ``mu^-1`` (domain error outside the table range)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.mu[0]) or np.any(x > self.mu[-1]):
            raise DomainError(f"x outside the {self.branch} mu-range "
                              f"[{self.mu[0]:.6g}, {self.mu[-1]:.6g}]")
        return PchipInterpolator(self.mu, self.y)(x)

    def mu_prime_at(self, y):
        return PchipInterpolator(self.y[:-1], self.mu_prime, extrapolate=True)(y)

    def nu_at(self, y):
        return PchipInterpolator(self.y, self.nu, extrapolate=True)(y)

    def to_csv(self) -> str:
        """CSV with columns y, mu, nu_rescaled, mu_prime, nu_prime, epsilon, t."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "mu", "nu_rescaled", "mu_prime", "nu_prime", "epsilon", "t"])
        mp = np.append(self.mu_prime, np.nan)
        np_ = np.append(self.nu_prime, np.nan)
        for k in range(self.n):
            w.writerow([f"{v:.16e}" for v in (self.y[k], self.mu[k], self.nu[k], mp[k],
                                               np_[k], self.epsilon, self.t)])
        return buf.getvalue()


def _table(branch: str, sigma: np.ndarray, scale: float, eps: float, t: float) -> SamplingTable:
    sigma = sigma[np.argsort(sigma.real, kind="stable")]
    n = sigma.size
    if n > 1 and np.any(np.diff(sigma.real) <= 0):
        raise ClassificationError(f"{branch} branch has repeated real parts")
    y = (np.arange(1, n + 1) - 0.5) / n
    return SamplingTable(branch, y, sigma.real.copy(), sigma.imag / scale, scale, eps, t)


def sampling_tables(sets: BranchSets, spectrum: ComplexSpectrum,
                    eps: Optional[float] = None) -> dict:
    """Sampling tables ``{"U": ..., "L": ...}`` (``"L"`` only if non-empty)."""
    eps = sets.epsilon if eps is None else eps
    s = spectrum.sigma
    out = {"U": _table("U", s[sets.S_U], delta(eps), eps, sets.t)}
    if sets.N_L > 0:
        out["L"] = _table("L", s[sets.S_L], eps, eps, sets.t)
    return out


def table_distance(a: SamplingTable, b: SamplingTable, column: str = "mu",
                   n_grid: int = 512) -> float:
    """Sup-norm distance between two tables on a common interior y-grid."""
    def series(tab):
        if column in ("mu", "nu"):
            return tab.y, getattr(tab, column)
        return tab.y[:-1], getattr(tab, column)
    ya, va = series(a)
    yb, vb = series(b)
    lo, hi = max(ya[0], yb[0]), min(ya[-1], yb[-1])
    grid = np.linspace(lo, hi, n_grid)
    return float(np.max(np.abs(PchipInterpolator(ya, va)(grid) - PchipInterpolator(yb, vb)(grid))))


def derivative_jump(table: SamplingTable, x_caustic: float) -> tuple[int, int]:
    """Index of the largest adjacent jump in ``mu_prime`` and the predicted index.

    The prediction is the grid cell containing ``mu^-1(x_caustic)``.
    """
    jumps = np.abs(np.diff(table.mu_prime))
    measured = int(np.argmax(jumps))
    predicted = int(np.clip(np.floor(table.y_of_mu(x_caustic) * table.n), 0, table.n - 2))
    return measured, predicted

# }}}


# {{{ exponent fits

@dataclass(frozen=True)
class ExponentFit:
    """Edge exponents and fit quality over an eps sweep."""

    epsilons: tuple
    q_minus: float
    q_plus: float
    r_minus: float
    r_plus: float
    r2: dict
    n_outliers: tuple

    def as_dict(self) -> dict:
        return {"epsilons": list(self.epsilons), "q_minus": self.q_minus,
                "q_plus": self.q_plus, "r_minus": self.r_minus, "r_plus": self.r_plus,
                "r2": dict(self.r2), "n_outliers": list(self.n_outliers)}


def _slope(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - pred) ** 2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(r2)


def fit_exponents(epsilons: Sequence[float], tables: Sequence[SamplingTable],
                  n_outliers: Sequence[int] = ()) -> ExponentFit:
    """Power-law growth of the upper-branch edges as ``eps -> 0``.

    ``|mu_U,1| ~ eps^-q-``, ``mu_U,N_U ~ eps^-q+``, and for the rescaled
    imaginary parts ``nu_U,1 / delta ~ eps^-r-``, ``nu_U,N_U / delta ~ eps^-r+``.
    Each exponent is minus the least-squares slope in log-log coordinates.
    """
    eps = np.asarray(epsilons, dtype=float)
    if eps.size < 4:
        raise ValueError("at least four eps values are required")
    le = np.log(eps)
    cols = {
        "q_minus": [abs(t.mu[0]) for t in tables],
        "q_plus": [abs(t.mu[-1]) for t in tables],
        "r_minus": [t.nu[0] for t in tables],
        "r_plus": [t.nu[-1] for t in tables],
    }
    vals, r2 = {}, {}
    for k, v in cols.items():
        s, r = _slope(le, np.log(np.asarray(v)))
        vals[k] = -s
        r2[k] = r
        if r < 0.99:
            warnings.warn(f"poor power-law fit for {k}: R^2={r:.4f}", RuntimeWarning)
    return ExponentFit(tuple(eps.tolist()), vals["q_minus"], vals["q_plus"], vals["r_minus"],
                       vals["r_plus"], r2, tuple(int(n) for n in n_outliers))


def exponent_sweep(profile: Profile, epsilons: Sequence[float], t: float,
                   config: ClassifyConfig = ClassifyConfig()) -> ExponentFit:
    """Decompose ``C(t)`` for each eps, classify, and fit the edge exponents."""
    tables, nout, used = [], [], []
    for e in epsilons:
        ens = quantize(profile, e)
        sp = eig_C(ens, t, vectors=False)
        sets = classify(sp, ens.epsilon, t, profile, config)
        tables.append(sampling_tables(sets, sp)["U"])
        nout.append(sets.N_o)
        used.append(ens.epsilon)
    return fit_exponents(used, tables, nout)

# }}}


# {{{ modulation fields and the periodic wave

@dataclass(frozen=True)
class WhithamFields:
    """Modulation fields at ``x0`` extracted from sampling tables."""

    x0: float
    t: float
    epsilon: float
    psi_U: float
    psi_L: float
    phi_L: float
    p: float
    N_L: int
    mu_prime_L: float

    @property
    def r(self) -> float:
        return float(np.exp(-self.phi_L))


def whitham_targets(profile: Profile, x: float, t: float) -> tuple[float, float, float]:
    """Limits of ``(psi_U, psi_L, phi_L)`` from the Burgers branches."""
    b = branches(profile, x, t)
    if b.n != 3:
        raise DomainError("(x, t) is not in the triple-valued region")
    u0, u1, u2 = b.values
    return float(u0), float(u2 - u1), float(0.5 * np.log((u2 - u0) / (u1 - u0)))


def modulation_fields(tables: dict, eps: float, x: float, t: float,
                      strict_phase: bool = False) -> WhithamFields:
    """Evaluate ``psi_U``, ``psi_L``, ``phi_L`` and the anchored phase at ``x``.

    The phase comes from the lower-branch point ``mu_L,k0`` nearest to ``x``:
    ``p = (x - mu_L,k0) N_L / mu_L'(y*)``, using the same derivative as
    ``psi_L`` so that a crest of the local wave sits on ``mu_L,k0``.
    """
    if "L" not in tables:
        raise DomainError("no lower branch at this time")
    tU, tL = tables["U"], tables["L"]
    yU = tU.y_of_mu(x)
    yL = tL.y_of_mu(x)
    mpU = float(tU.mu_prime_at(yU))
    mpL = float(tL.mu_prime_at(yL))
    psi_U = 2.0 * np.pi * eps * tU.n / mpU
    psi_L = 2.0 * np.pi * eps * tL.n / mpL
    phi_L = psi_L * float(tL.nu_at(yL))
    k0 = int(np.argmin(np.abs(tL.mu - x)))
    p = (x - tL.mu[k0]) * tL.n / mpL
    if abs(p) > 0.55:
        msg = f"anchored phase p={p:.3f} outside [-0.55, 0.55]"
        if strict_phase:
            raise DomainError(msg)
        warnings.warn(msg, PhaseAnomaly)
    return WhithamFields(float(x), float(t), float(eps), psi_U, psi_L, phi_L, float(p),
                         tL.n, mpL)


def kernel(phi: float, theta) -> np.ndarray:
    """``sinh(phi) / (cosh(phi) - cos(theta))``; its mean over a period is 1."""
    return np.sinh(phi) / (np.cosh(phi) - np.cos(theta))


def wave_amplitude(fields: WhithamFields) -> float:
    """Crest height above the mean level: ``psi_L sinh(phi_L) / (cosh(phi_L) - 1)``."""
    return float(fields.psi_L * np.sinh(fields.phi_L) / (np.cosh(fields.phi_L) - 1.0))


def periodic_profile(fields: WhithamFields, x, p: Optional[float] = None) -> np.ndarray:
    """Local periodic wave with frozen modulation fields around ``x0``."""
    x = np.asarray(x, dtype=float)
    p = fields.p if p is None else p
    theta = fields.psi_L * (x - fields.x0) / fields.epsilon + 2.0 * np.pi * p
    return fields.psi_U + fields.psi_L * kernel(fields.phi_L, theta)


def fit_phase(fields: WhithamFields, x, u) -> float:
    """Phase minimizing the RMS mismatch with ``u`` (overlay mode)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    err = lambda p: float(np.mean((periodic_profile(fields, x, p) - u) ** 2))
    grid = np.linspace(-0.5, 0.5, 101)
    p0 = grid[int(np.argmin([err(p) for p in grid]))]
    res = minimize_scalar(err, bounds=(p0 - 0.01, p0 + 0.01), method="bounded",
                          options={"xatol": 1e-10})
    return float((res.x + 0.5) % 1.0 - 0.5)


def comb_sum(Omega: float, tau: float, J: int = 10 ** 4, tail: bool = False) -> float:
    """``sum_{|j| <= J} 1 / ((tau + j / Omega)^2 + 1)``.

    With ``tail`` the omitted terms are added through the midpoint integral
    approximation, accurate to ``O(Omega^2 / J^3)``.
    """
    j = np.arange(-J, J + 1)
    s = float(np.sum(1.0 / ((tau + j / Omega) ** 2 + 1.0)))
    if tail:
        a = (J + 0.5) / Omega
        s += Omega * (np.pi - np.arctan(a + tau) - np.arctan(a - tau))
    return s


def comb_closed_form(Omega: float, tau: float) -> float:
    """``pi Omega sinh(2 pi Omega) / (cosh(2 pi Omega) - cos(2 pi Omega tau))``."""
    w = 2.0 * np.pi * Omega
    return float(np.pi * Omega * np.sinh(w) / (np.cosh(w) - np.cos(w * tau)))


def diagnostic_decompose(spectrum: ComplexSpectrum, sets: BranchSets, eps: float, x):
    """Partial Lorentzian sums ``(u_U, u_L, u_o)``; they add up to the SIGMA route."""
    s = spectrum.sigma
    parts = []
    for S in (sets.S_U, sets.S_L, sets.S_o):
        if S.size:
            parts.append(u_from_sigmas(s[S], eps, x))
        else:
            parts.append(np.zeros(np.shape(x)))
    return tuple(parts)

# }}}
