"""Small eigenvalues of ``A(x, t)``, their eigenvectors, and Bohr-Sommerfeld spacing.

Near ``alpha = 0`` the eigenvalues of the Hermitian matrix ``A(x, t)`` come in
two velocity families inside the triple-valued Burgers region: slow ones with
``alpha_x = O(1 / ln(1/eps))`` and fast ones with ``alpha_x = O(1)``.  Their
eigenvectors are WKB waves ``v_j ~ a(y_j) exp(i S(y_j) / eps)`` with eikonal

    S'(y) = U(Lambda'(y) [x + 2 Lambda(y) t + gamma(Lambda(y))]),

``U`` the sawtooth ``theta - pi`` on ``(0, pi]`` and ``theta + pi`` on
``(-pi, 0)``, and amplitude ``|a|^2 ~ a0^2 Lambda'(y) / (-Lambda(y))`` on each
admissible interval.  The x-positions where ``alpha = 0`` is an eigenvalue
are the eigenvalues of ``B(t)``; they are spaced by ``2 pi eps / f`` with
``f+ = u2B - u1B`` (fast) and ``f- = u0B`` (slow).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad
from scipy.optimize import brentq

from .burgers import branches
from .ensemble import Ensemble, build_A, build_B
from .profile import DomainError, Profile, density, lambda_map, phase, turning_points
from .spectral import alpha_velocities, eig_hermitian

__all__ = [
    "SLOW",
    "FAST",
    "AMBIGUOUS",
    "SmallEigenSet",
    "OrbitCurve",
    "BSPrediction",
    "Crossings",
    "velocity_predictions",
    "label_velocities",
    "small_eigs",
    "density_G",
    "density_G_cdf",
    "density_G_asymptotic",
    "eta",
    "eta_asymptotic",
    "cdf_deviation",
    "tv_distance",
    "U",
    "eikonal_Sprime",
    "admissible_intervals",
    "interval_masks",
    "wkb_amplitude_fit",
    "phase_shift_deviation",
    "orbit",
    "g0",
    "bohr_sommerfeld",
    "zero_crossings",
    "spacing_ratios",
]

SLOW, FAST, AMBIGUOUS = "SLOW", "FAST", "AMBIGUOUS"
AMBIGUOUS_BAND = 0.25


# {{{ velocities and classification

def velocity_predictions(profile: Profile, x0: float, t: float, eps: float):
    """Predicted slow and fast x-velocities of small eigenvalues.

    ``v_slow = (2p - 1) u0B / (p ln(1/eps))`` and
    ``v_fast = 2 (u2B - u1B) / ln((u2B - u0B) / (u1B - u0B))``; ``v_fast`` is
    ``None`` outside the triple-valued region.
    """
    b = branches(profile, x0, t)
    p = profile.decay_power
    v_slow = (2 * p - 1) * b.values[0] / (p * np.log(1.0 / eps))
    if b.n != 3:
        return float(v_slow), None
    u0, u1, u2 = b.values
    v_fast = 2.0 * (u2 - u1) / np.log((u2 - u0) / (u1 - u0))
    return float(v_slow), float(v_fast)


def label_velocities(alpha_x, v_slow: float, v_fast: Optional[float], L: float):
    """SLOW / FAST / AMBIGUOUS labels relative to ``v_split = sqrt(v_slow v_fast)``.

    Values within 25% of ``v_split`` are AMBIGUOUS.  Outside the triple region
    (``v_fast is None``) the split uses the largest possible velocity ``2L``
    in place of ``v_fast``.
    """
    vf = 2.0 * L if v_fast is None else v_fast
    split = np.sqrt(v_slow * vf)
    ax = np.asarray(alpha_x, dtype=float)
    lab = np.where(ax > split, FAST, SLOW).astype(object)
    lab[np.abs(ax - split) <= AMBIGUOUS_BAND * split] = AMBIGUOUS
    return lab, float(split)


@dataclass(frozen=True, eq=False)
class SmallEigenSet:
    """Eigenvalues of ``A(x, t)`` with ``|alpha| <= eps^r`` and their labels."""

    x: float
    t: float
    epsilon: float
    r: float
    index: np.ndarray
    alpha: np.ndarray
    alpha_x: np.ndarray
    labels: np.ndarray
    v_slow: float
    v_fast: Optional[float]
    v_split: float
    vectors: np.ndarray

    def of(self, label: str) -> np.ndarray:
        """Positions (into this set) carrying ``label``, nearest to zero first."""
        pos = np.nonzero(self.labels == label)[0]
        return pos[np.argsort(np.abs(self.alpha[pos]))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "alpha_x", "class"])
        for a, v, c in zip(self.alpha, self.alpha_x, self.labels):
            w.writerow([f"{a:.16e}", f"{v:.16e}", c])
        return buf.getvalue()


def small_eigs(ens: Ensemble, x: float, t: float, r: float = 0.4, **kw) -> SmallEigenSet:
    """Small eigenvalues of ``A(x, t)`` with velocities and SLOW/FAST labels."""
    if not 1.0 / 3.0 <= r <= 0.5:
        raise ValueError("r must lie in [1/3, 1/2]")
    eps = ens.epsilon
    sp = eig_hermitian(build_A(ens, x, t), **kw)
    ax, _ = alpha_velocities(sp, ens)
    idx = np.nonzero(np.abs(sp.alpha) <= eps ** r)[0]
    vs, vf = velocity_predictions(ens.profile, x, t, eps)
    lab, split = label_velocities(ax[idx], vs, vf, ens.L)
    return SmallEigenSet(float(x), float(t), eps, r, idx, sp.alpha[idx], ax[idx], lab,
                         vs, vf, split, sp.vectors[:, idx])

# }}}


# {{{ limiting density

def _alpha_window(profile: Profile, lam: float, x: float, t: float):
    xm, xp = turning_points(profile, lam)
    return -2.0 * lam * (x + 2.0 * lam * t - xp), -2.0 * lam * (x + 2.0 * lam * t - xm)


def _lambda_breaks(profile: Profile, n: int = 400, alpha: float = 1.0) -> np.ndarray:
    # the support reaches down to the small root eta ~ -K |alpha|^(2p/(2p-1))
    L = profile.peak
    floor = min(1e-14 * L, 1e-4 * abs(eta_asymptotic(profile, alpha))) if alpha else 1e-14 * L
    return -np.geomspace(L, floor, n)


def density_G(profile: Profile, alpha: float, x: float, t: float) -> float:
    """``G(alpha) = -(4 pi)^-1 int chi(alpha in window(lam)) dlam / lam``.

    The window is ``[-2 lam (x + 2 lam t - x+), -2 lam (x + 2 lam t - x-)]``.
    """
    def f(lam):
        lo, hi = _alpha_window(profile, lam, x, t)
        return -1.0 / (4.0 * np.pi * lam) if lo < alpha < hi else 0.0
    pts = _lambda_breaks(profile, alpha=alpha)
    return float(sum(quad(f, pts[i], pts[i + 1], limit=200)[0] for i in range(pts.size - 1)))


def density_G_cdf(profile: Profile, a1: float, a2: float, x: float, t: float,
                  n_breaks: int = 400) -> float:
    """``int_{a1}^{a2} G`` as ``-(4 pi)^-1 int |[a1, a2] cap window(lam)| dlam / lam``."""
    def f(lam):
        lo, hi = _alpha_window(profile, lam, x, t)
        return -max(0.0, min(hi, a2) - max(lo, a1)) / (4.0 * np.pi * lam)
    small = min(abs(a1), abs(a2)) if a1 * a2 > 0 else 0.0
    pts = _lambda_breaks(profile, n_breaks, small)
    return float(sum(quad(f, pts[i], pts[i + 1], limit=200)[0] for i in range(pts.size - 1)))


def density_G_asymptotic(profile: Profile, alpha: float) -> float:
    """Leading small-``alpha`` behaviour ``(4 pi)^-1 (2p / (2p - 1)) ln(1/|alpha|)``."""
    p = profile.decay_power
    return float((2 * p) / (2 * p - 1) * np.log(1.0 / abs(alpha)) / (4.0 * np.pi))


def eta_asymptotic(profile: Profile, alpha: float) -> float:
    """``-K |alpha|^(2p/(2p-1))`` with ``K = (2^(2p) C)^(-1/(2p-1))``."""
    p, C = profile.decay_power, profile.decay_const
    K = (1.0 / (2 ** (2 * p) * C)) ** (1.0 / (2 * p - 1))
    return float(-K * abs(alpha) ** (2 * p / (2 * p - 1)))


def eta(profile: Profile, alpha: float, x: float, t: float) -> float:
    """Small root ``eta < 0`` of ``u0(alpha / (2 eta) + x + 2 eta t) = -eta``."""
    g = lambda e: profile.u0(alpha / (2.0 * e) + x + 2.0 * e * t) + e
    guess = eta_asymptotic(profile, alpha)
    lo, hi = 4.0 * guess, 0.25 * guess
    for _ in range(40):
        if g(lo) * g(hi) < 0:
            break
        lo, hi = 2.0 * lo, 0.5 * hi
    else:
        raise DomainError("no bracket for eta")
    return float(brentq(g, lo, hi, xtol=1e-300, rtol=1e-14))


def cdf_deviation(alphas, eps: float, profile: Profile, x: float, t: float,
                  window: float) -> float:
    """Sup distance between ``eps * #{alpha_k <= a}`` and ``int_{-w}^{a} G`` on ``[-w, w]``.

    Both one-sided limits of the empirical step function are checked at
    every jump, together with the right end of the window.
    """
    a = np.sort(np.asarray(alphas, dtype=float))
    a = a[np.abs(a) <= window]
    G = np.array([density_G_cdf(profile, -window, v, x, t) for v in a])
    hi = eps * np.arange(1, a.size + 1)
    lo = eps * np.arange(0, a.size)
    total = abs(eps * a.size - density_G_cdf(profile, -window, window, x, t))
    if a.size == 0:
        return total
    return float(max(np.max(np.abs(hi - G)), np.max(np.abs(lo - G)), total))


def tv_distance(alphas, eps: float, profile: Profile, x: float, t: float, window: float,
                n_bins: int = 16) -> float:
    """Total-variation distance between binned ``eps``-weighted counts and ``G``."""
    edges = np.linspace(-window, window, n_bins + 1)
    counts, _ = np.histogram(alphas, bins=edges)
    mass = np.array([density_G_cdf(profile, edges[i], edges[i + 1], x, t)
                     for i in range(n_bins)])
    return float(0.5 * np.sum(np.abs(eps * counts - mass)))

# }}}


# {{{ eikonal and amplitude

def U(theta):
    """Sawtooth: ``theta - pi`` on ``(0, pi]``, ``theta + pi`` on ``(-pi, 0)``, 2 pi periodic.

    At the jump ``theta = 0 (mod 2 pi)`` the value is ``pi``, the left limit,
    consistent with ``U = theta - pi`` on ``(0, 2 pi]``.
    """
    th = np.asarray(theta, dtype=float)
    w = np.pi - np.mod(np.pi - th, 2.0 * np.pi)  # reduce to (-pi, pi]
    return np.where(w > 0, w - np.pi, w + np.pi)


def _eikonal_argument(profile: Profile, lam, x: float, t: float):
    lam = np.asarray(lam, dtype=float)
    return (x + 2.0 * lam * t + phase(profile, lam)) / density(profile, lam)


def eikonal_Sprime(profile: Profile, y, x: float, t: float, strict: bool = True):
    """``S'(y) = U(Lambda'(y) [x + 2 Lambda(y) t + gamma(Lambda(y))])``.

    Raises ``DomainError`` when the argument leaves ``[-pi, pi]`` (``y`` not
    admissible) and ``strict`` is set.
    """
    lam = lambda_map(profile)(np.asarray(y, dtype=float))
    arg = _eikonal_argument(profile, lam, x, t)
    if strict and np.any(np.abs(arg) > np.pi * (1 + 1e-9)):
        raise DomainError("y outside the admissible intervals")
    return U(arg)


def admissible_intervals(profile: Profile, x: float, t: float) -> list:
    """Admissible ``lam``-intervals from the Burgers branches.

    ``[(-u0B, 0)]`` in the single-valued region; the triple-valued region adds
    ``(-u2B, -u1B)``.  The interval abutting ``lam = 0`` is listed first.
    """
    b = branches(profile, x, t)
    out = [(-b.values[0], 0.0)]
    if b.n == 3:
        out.append((-b.values[2], -b.values[1]))
    return out


def interval_masks(ens: Ensemble, x: float, t: float) -> list:
    """Index masks of ``lam_j`` inside each admissible interval."""
    return [(ens.lam >= lo) & (ens.lam <= hi) for lo, hi in admissible_intervals(ens.profile, x, t)]


@dataclass(frozen=True)
class AmplitudeFit:
    """Per-interval WKB amplitude fit."""

    interval: tuple
    a0: Optional[float]
    rms: Optional[float]
    fraction: float
    n_points: int


def wkb_amplitude_fit(ens: Ensemble, vector, x: float, t: float, min_points: int = 8) -> list:
    """Fit ``|v_j|^2 ~ a0^2 Lambda'(y_j) / (-Lambda(y_j))`` on each admissible interval.

    Returns one ``AmplitudeFit`` per interval (abutting interval first) with
    the least-squares ``a0``, the fit RMS relative to the interval peak of
    ``|v|^2``, and the interval's share of the squared norm.  Intervals with
    fewer than ``min_points`` indices are reported without a fit.
    """
    p2 = np.abs(np.asarray(vector)) ** 2
    p2 = p2 / p2.sum()
    g = 1.0 / (density(ens.profile, ens.lam) * (-ens.lam))
    fits = []
    for (lo, hi), m in zip(admissible_intervals(ens.profile, x, t), interval_masks(ens, x, t)):
        n = int(m.sum())
        frac = float(p2[m].sum())
        if n < min_points:
            fits.append(AmplitudeFit((lo, hi), None, None, frac, n))
            continue
        a2 = float(np.dot(p2[m], g[m]) / np.dot(g[m], g[m]))
        rms = float(np.sqrt(np.mean((p2[m] - a2 * g[m]) ** 2)) / np.max(p2[m]))
        fits.append(AmplitudeFit((lo, hi), float(np.sqrt(a2)), rms, frac, n))
    return fits


def phase_shift_deviation(ens: Ensemble, vector, x: float, t: float,
                          mask: Optional[np.ndarray] = None) -> float:
    """Mean ``|arg(v_{j+1} / v_j) - S'(y_j)|`` (wrapped to ``(-pi, pi]``).

    Averaged over consecutive pairs inside ``mask`` (default: the admissible
    interval abutting ``lam = 0``).
    """
    v = np.asarray(vector)
    if mask is None:
        mask = interval_masks(ens, x, t)[0]
    Sp = U(_eikonal_argument(ens.profile, ens.lam, x, t))
    shift = np.angle(v[1:] * np.conj(v[:-1]))
    dev = np.angle(np.exp(1j * (shift - Sp[:-1])))
    pair = mask[1:] & mask[:-1]
    if not pair.any():
        raise DomainError("no consecutive indices inside the interval")
    return float(np.mean(np.abs(dev[pair])))

# }}}


# {{{ orbits and Bohr-Sommerfeld

@dataclass(frozen=True, eq=False)
class OrbitCurve:
    """``theta(lam) = pi + (x + 2 lam t + gamma) / F`` on a grid, with admissibility."""

    x: float
    t: float
    lam: np.ndarray
    theta: np.ndarray
    admissible: np.ndarray
    intervals: list

    def identity_residual(self, profile: Profile) -> float:
        """``max |F theta - (x + pi F + 2 lam t + gamma)|``."""
        F = density(profile, self.lam)
        rhs = self.x + np.pi * F + 2.0 * self.lam * self.t + phase(profile, self.lam)
        return float(np.max(np.abs(F * self.theta - rhs)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "theta", "admissible"])
        for l, th, a in zip(self.lam, self.theta, self.admissible):
            w.writerow([f"{l:.16e}", f"{th:.16e}", int(a)])
        return buf.getvalue()


def orbit(profile: Profile, x: float, t: float, n: int = 2001) -> OrbitCurve:
    """Orbit of the zero level set parametrized by ``lam``."""
    L = profile.peak
    s = np.linspace(0.0, 1.0, n + 2)[1:-1]
    lam = -L * np.cos(0.5 * np.pi * s) ** 2  # clusters near both ends
    theta = np.pi + _eikonal_argument(profile, lam, x, t)
    adm = (theta > 0) & (theta < 2.0 * np.pi)
    return OrbitCurve(float(x), float(t), lam, theta, adm, admissible_intervals(profile, x, t))


def _snap_angle(theta: float) -> float:
    return float(np.pi * np.round(theta / np.pi))


def g0(profile: Profile, x: float, t: float, kind: str) -> float:
    """Parallel transport ``g0+`` (``kind="fast"``) or ``g0-`` (``kind="slow"``).

    Integrated-by-parts form
    ``[theta Y]_{lam_min}^{lam_max} - int theta F dlam`` with
    ``theta F = x + pi F + 2 lam t + gamma`` and endpoint angles snapped to
    ``{0, pi, 2 pi}``.
    """
    b = branches(profile, x, t)
    if kind == "fast":
        if b.n != 3:
            raise DomainError("fast orbits exist only in the triple-valued region")
        lmin, lmax = -b.values[2], -b.values[1]
        th_max = _snap_angle(np.pi + float(_eikonal_argument(profile, lmax, x, t)))
    elif kind == "slow":
        lmin, lmax = -b.values[0], 0.0
        th_max = np.pi
    else:
        raise ValueError("kind must be 'fast' or 'slow'")
    th_min = _snap_angle(np.pi + float(_eikonal_argument(profile, lmin, x, t)))
    lmap = lambda_map(profile)
    Ymin = float(lmap.cumulative(lmin))
    Ymax = lmap.mass if lmax == 0.0 else float(lmap.cumulative(lmax))
    integral = x * (lmax - lmin) + np.pi * (Ymax - Ymin) + t * (lmax ** 2 - lmin ** 2)
    if not profile.even:
        integral += quad(lambda l: float(phase(profile, l)), lmin, min(lmax, -1e-300),
                         limit=200)[0]
    return float(th_max * Ymax - th_min * Ymin - integral)


@dataclass(frozen=True, eq=False)
class BSPrediction:
    """Bohr-Sommerfeld spacing prediction near ``x0``."""

    x0: float
    t: float
    epsilon: float
    g0_plus: float
    g0_minus: float
    f_plus: float
    f_minus: float
    anchor_plus: Optional[float] = None
    anchor_minus: Optional[float] = None

    @property
    def dx_plus(self) -> float:
        return 2.0 * np.pi * self.epsilon / self.f_plus

    @property
    def dx_minus(self) -> float:
        return 2.0 * np.pi * self.epsilon / self.f_minus

    def grid(self, kind: str, l) -> np.ndarray:
        """Predicted ``x_l = anchor - l * 2 pi eps / f`` (decreasing in ``l``)."""
        anchor, dx = ((self.anchor_plus, self.dx_plus) if kind == "fast"
                      else (self.anchor_minus, self.dx_minus))
        if anchor is None:
            raise ValueError("no anchor for this family")
        return anchor - np.asarray(l, dtype=float) * dx

    def as_dict(self) -> dict:
        return {"x0": self.x0, "t": self.t, "epsilon": self.epsilon,
                "g0_plus": self.g0_plus, "g0_minus": self.g0_minus,
                "f_plus": self.f_plus, "f_minus": self.f_minus,
                "dx_plus": self.dx_plus, "dx_minus": self.dx_minus,
                "anchor_plus": self.anchor_plus, "anchor_minus": self.anchor_minus}


def bohr_sommerfeld(profile: Profile, x0: float, t: float, eps: float,
                    crossings: Optional["Crossings"] = None) -> BSPrediction:
    """``g0+-``, ``f+- `` and predicted spacings, anchored at the nearest observed crossings."""
    b = branches(profile, x0, t)
    if b.n != 3 or b.degenerate:
        raise DomainError("x0 must be strictly inside the triple-valued region")
    u0, u1, u2 = b.values
    ap = am = None
    if crossings is not None:
        for lab, name in ((FAST, "ap"), (SLOW, "am")):
            xs = crossings.x[crossings.labels == lab]
            if xs.size:
                val = float(xs[np.argmin(np.abs(xs - x0))])
                if name == "ap":
                    ap = val
                else:
                    am = val
    return BSPrediction(float(x0), float(t), float(eps), g0(profile, x0, t, "fast"),
                        g0(profile, x0, t, "slow"), float(u2 - u1), float(u0), ap, am)


@dataclass(frozen=True, eq=False)
class Crossings:
    """Positions ``x`` where ``0`` is an eigenvalue of ``A(x, t)``, with labels."""

    t: float
    epsilon: float
    x: np.ndarray
    alpha_x: np.ndarray
    labels: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "alpha_x", "label"])
        for a, v, c in zip(self.x, self.alpha_x, self.labels):
            w.writerow([f"{a:.16e}", f"{v:.16e}", c])
        return buf.getvalue()


def zero_crossings(ens: Ensemble, t: float, window: tuple) -> Crossings:
    """Eigenvalues of ``B(t)`` inside ``window`` with their ``alpha_x`` labels.

    With ``B w = x* w`` the null vector of ``A(x*, t) = D (x* - B) D`` is
    ``D^-1 w``, giving ``alpha_x = 1 / sum_j |w_j|^2 / (-2 lam_j)``.
    """
    xs, W = sla.eigh(build_B(ens, t))
    m = (xs > window[0]) & (xs < window[1])
    xs, W = xs[m], W[:, m]
    ax = 1.0 / ((1.0 / (-2.0 * ens.lam)) @ (np.abs(W) ** 2))
    labels = np.empty(xs.size, dtype=object)
    for i, x in enumerate(xs):
        vs, vf = velocity_predictions(ens.profile, x, t, ens.epsilon)
        labels[i] = label_velocities([ax[i]], vs, vf, ens.L)[0][0]
    return Crossings(float(t), ens.epsilon, xs, ax, labels)


def spacing_ratios(crossings: Crossings, profile: Profile, label: str) -> np.ndarray:
    """Consecutive same-label spacings divided by the local ``2 pi eps / f``.

    ``f`` is evaluated at the midpoint of each pair (``f+`` for FAST, ``f-``
    for SLOW).
    """
    xs = crossings.x[crossings.labels == label]
    if xs.size < 2:
        return np.empty(0)
    out = np.empty(xs.size - 1)
    for i in range(xs.size - 1):
        b = branches(profile, 0.5 * (xs[i] + xs[i + 1]), crossings.t)
        if label == FAST:
            if b.n != 3:
                out[i] = np.nan
                continue
            f = b.values[2] - b.values[1]
        else:
            f = b.values[0]
        out[i] = (xs[i + 1] - xs[i]) / (2.0 * np.pi * crossings.epsilon / f)
    return out

# }}}
