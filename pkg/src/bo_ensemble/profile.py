"""Initial profiles and the eigenvalue-density map they induce.

An admissible profile ``u0`` is positive, has a single maximum ``L = u0(x_peak)``
and decays algebraically, ``u0(x) ~ C |x|^(-2p)`` as ``|x| -> inf``.  For every
level ``lam`` in ``(-L, 0)`` the equation ``u0(x) = -lam`` has exactly two roots
``x_minus(lam) < x_plus(lam)`` (the turning points), and

    F(lam)     = (x_plus - x_minus) / (2 pi)       density of eigenvalues
    gamma(lam) = -(x_plus + x_minus) / 2           phase constant
    Y(lam)     = int_{-L}^{lam} F                  counting function
    M          = Y(0) = (1 / 2 pi) int u0 dx

:class:`LambdaMap` tabulates ``Y`` and inverts it, giving ``Lambda(y)`` with
``Y(Lambda(y)) = y`` on ``(0, M)``.
"""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

logger = logging.getLogger(__name__)

__all__ = [
    "ProfileError",
    "DomainError",
    "Profile",
    "lorentzian",
    "quartic",
    "PROFILES",
    "get_profile",
    "validate_profile",
    "turning_points",
    "density",
    "phase",
    "small_lambda_density",
    "cumulative_density_quad",
    "LambdaMap",
    "lambda_map",
]


class ProfileError(ValueError):
    """Raised when a profile violates the structural assumptions."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a map."""


@dataclass(frozen=True, eq=False)
class Profile:
    """A bell-shaped initial condition with algebraic decay.

    Parameters
    ----------
    name : str
        Registry name, used in reports.
    u0, du0 : callable
        Vectorized profile and its derivative.
    x_peak : float
        Location of the unique maximum.
    decay_power : int
        ``p`` in ``u0 ~ C |x|^(-2p)``.
    decay_const : float
        ``C`` in the same law.
    even : bool
        If true the profile is symmetric about ``x = 0`` and ``gamma`` is
        identically zero.
    exact_turning_points : callable, optional
        Closed-form ``lam -> (x_minus, x_plus)``.  When absent the turning
        points are found by a bracketed Newton iteration.
    """

    name: str
    u0: Callable[[np.ndarray], np.ndarray]
    du0: Callable[[np.ndarray], np.ndarray]
    x_peak: float
    decay_power: int
    decay_const: float
    even: bool = False
    exact_turning_points: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    @property
    def peak(self) -> float:
        """Maximum value ``L`` of the profile."""
        return float(self.u0(np.asarray(self.x_peak, dtype=float)))

    @property
    def mass(self) -> float:
        """``M = (2 pi)^-1 int u0``, the total eigenvalue count per unit 1/eps."""
        return _mass(self)

    def with_amplitude(self, factor: float) -> "Profile":
        """Profile ``factor * u0``; the peak and decay constant scale with it."""
        if factor <= 0:
            raise ProfileError("amplitude factor must be positive")
        u0, du0, exact = self.u0, self.du0, self.exact_turning_points
        scaled_exact = None
        if exact is not None:
            scaled_exact = lambda lam: exact(np.asarray(lam, dtype=float) / factor)  # noqa: E731
        return Profile(
            name=f"{self.name}*{factor:g}",
            u0=lambda x: factor * u0(x),
            du0=lambda x: factor * du0(x),
            x_peak=self.x_peak,
            decay_power=self.decay_power,
            decay_const=factor * self.decay_const,
            even=self.even,
            exact_turning_points=scaled_exact,
            params={**self.params, "amplitude_factor": factor},
        )


_MASS_CACHE: "weakref.WeakKeyDictionary[Profile, float]" = weakref.WeakKeyDictionary()


def _mass(profile: Profile) -> float:
    key = profile
    if key not in _MASS_CACHE:
        f = lambda x: float(profile.u0(np.asarray(x)))
        left, _ = integrate.quad(f, -np.inf, profile.x_peak, epsabs=1e-14, epsrel=1e-13, limit=400)
        right, _ = integrate.quad(f, profile.x_peak, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
        _MASS_CACHE[key] = (left + right) / (2 * np.pi)
    return _MASS_CACHE[key]


# {{{ registry

def lorentzian(amplitude: float = 2.0, center: float = 0.0) -> Profile:
    """``u0(x) = amplitude / (1 + (x - center)^2)``.

    The default is the standard test case with ``L = 2``, ``M = 1``,
    ``p = 1``, ``C = 2``.  A nonzero ``center`` gives the constant phase
    ``gamma = -center``.
    """
    if amplitude <= 0:
        raise ProfileError("amplitude must be positive")
    a, c = float(amplitude), float(center)

    def u0(x):
        return a / (1.0 + (np.asarray(x, dtype=float) - c) ** 2)

    def du0(x):
        z = np.asarray(x, dtype=float) - c
        return -2.0 * a * z / (1.0 + z * z) ** 2

    def exact(lam):
        lam = np.asarray(lam, dtype=float)
        half_width = np.sqrt(a / (-lam) - 1.0)
        return c - half_width, c + half_width

    return Profile(
        name="lorentzian",
        u0=u0,
        du0=du0,
        x_peak=c,
        decay_power=1,
        decay_const=a,
        even=(c == 0.0),
        exact_turning_points=exact,
        params={"amplitude": a, "center": c},
    )


def quartic(amplitude: float = 1.0) -> Profile:
    """``u0(x) = amplitude / (1 + x^4)``: even, ``p = 2``, flat-topped maximum."""
    a = float(amplitude)

    def u0(x):
        return a / (1.0 + np.asarray(x, dtype=float) ** 4)

    def du0(x):
        x = np.asarray(x, dtype=float)
        return -4.0 * a * x**3 / (1.0 + x**4) ** 2

    def exact(lam):
        lam = np.asarray(lam, dtype=float)
        half_width = (a / (-lam) - 1.0) ** 0.25
        return -half_width, half_width

    return Profile(
        name="quartic",
        u0=u0,
        du0=du0,
        x_peak=0.0,
        decay_power=2,
        decay_const=a,
        even=True,
        exact_turning_points=exact,
        params={"amplitude": a},
    )


PROFILES: dict[str, Callable[..., Profile]] = {
    "lorentzian": lorentzian,
    "quartic": quartic,
}


def get_profile(name: str, **params) -> Profile:
    """Build a registered profile by name."""
    try:
        factory = PROFILES[name]
    except KeyError:
        raise ProfileError(f"unknown profile {name!r}; known: {sorted(PROFILES)}") from None
    return factory(**params)


def validate_profile(profile: Profile, n_samples: int = 2001) -> None:
    """Check positivity, a single maximum and the stated algebraic decay.

    Raises
    ------
    ProfileError
        On the first violated assumption.
    """
    L = profile.peak
    if not np.isfinite(L) or L <= 0:
        raise ProfileError("profile maximum must be positive and finite")
    xs = profile.x_peak + np.linspace(-50.0, 50.0, n_samples)
    vals = profile.u0(xs)
    if np.any(vals <= 0):
        raise ProfileError("profile must be strictly positive")
    if np.any(vals > L * (1 + 1e-12)):
        raise ProfileError("x_peak is not the global maximizer")
    slope = profile.du0(xs)
    left, right = xs < profile.x_peak, xs > profile.x_peak
    if np.any(slope[left] < -1e-14) or np.any(slope[right] > 1e-14):
        raise ProfileError("profile must increase then decrease (single maximum)")
    p, C = profile.decay_power, profile.decay_const
    if p < 1:
        raise ProfileError("decay power p must be at least 1")
    for far in (1e4, -1e4):
        x = profile.x_peak + far
        ratio = float(profile.u0(np.asarray(x))) * abs(x) ** (2 * p) / C
        if abs(ratio - 1.0) > 1e-2:
            raise ProfileError(f"decay law u0 ~ C|x|^-2p violated at x={x:g} (ratio {ratio:.4g})")

# }}}


# {{{ turning points and pointwise maps

def _check_levels(profile: Profile, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    L = profile.peak
    if np.any(~np.isfinite(lam)) or np.any(lam <= -L) or np.any(lam >= 0):
        raise DomainError(f"lambda must lie in (-L, 0) = ({-L:g}, 0)")
    return lam


def _bracketed_newton(f, df, lo, hi, tol=4e-16, maxiter=200):
    """Vectorized safeguarded Newton for monotone ``f`` with a sign change on [lo, hi]."""
    lo, hi = lo.copy(), hi.copy()
    f_lo = f(lo)
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        fx = f(x)
        same = np.sign(fx) == np.sign(f_lo)
        lo = np.where(same, x, lo)
        f_lo = np.where(same, fx, f_lo)
        hi = np.where(same, hi, x)
        d = df(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - fx / d
        ok = np.isfinite(step) & (step > lo) & (step < hi)
        hit = fx == 0  # exact root: keep it
        x_new = np.where(hit, x, np.where(ok, step, 0.5 * (lo + hi)))
        done = hit | (np.abs(x_new - x) <= tol * (1.0 + np.abs(x)))
        x = x_new
        if np.all(done):
            break
    return x


def turning_points(profile: Profile, lam, exact: bool = True):
    """Roots ``x_minus < x_plus`` of ``u0(x) = -lam``.

    Parameters
    ----------
    profile : Profile
    lam : array_like
        Levels in ``(-L, 0)``.
    exact : bool
        Use the closed form when the profile provides one.

    Returns
    -------
    x_minus, x_plus : ndarray
    """
    lam = _check_levels(profile, lam)
    if exact and profile.exact_turning_points is not None:
        xm, xp = profile.exact_turning_points(lam)
        return np.asarray(xm, dtype=float), np.asarray(xp, dtype=float)
    shape = lam.shape
    level = -lam.ravel()
    x0 = profile.x_peak
    reach = (profile.decay_const / level) ** (1.0 / (2 * profile.decay_power))

    def f(x):
        return profile.u0(x) - level

    def expand(sign):
        far = x0 + sign * (2.0 * reach + 1.0)
        for _ in range(200):
            bad = profile.u0(far) >= level
            if not np.any(bad):
                break
            far = np.where(bad, x0 + 2.0 * (far - x0), far)
        return far

    right = expand(+1.0)
    left = expand(-1.0)
    peak = np.full_like(level, x0)
    xp = _bracketed_newton(f, profile.du0, peak, right)
    xm = _bracketed_newton(f, profile.du0, left, peak)
    return xm.reshape(shape), xp.reshape(shape)


def density(profile: Profile, lam) -> np.ndarray:
    """Eigenvalue density ``F(lam) = (x_plus - x_minus) / (2 pi)``."""
    xm, xp = turning_points(profile, lam)
    return (xp - xm) / (2 * np.pi)


def phase(profile: Profile, lam) -> np.ndarray:
    """Phase constant ``gamma(lam) = -(x_plus + x_minus) / 2`` (zero for even profiles)."""
    lam = _check_levels(profile, lam)
    if profile.even:
        return np.zeros_like(lam)
    xm, xp = turning_points(profile, lam)
    return -0.5 * (xp + xm)


def small_lambda_density(profile: Profile, lam) -> np.ndarray:
    """Leading behaviour of ``F`` as ``lam -> 0-``: ``pi^-1 (C / |lam|)^(1/2p)``."""
    lam = np.asarray(lam, dtype=float)
    return (profile.decay_const / np.abs(lam)) ** (1.0 / (2 * profile.decay_power)) / np.pi


def cumulative_density_quad(profile: Profile, lam: float, method: str = "area") -> float:
    """Reference value of ``Y(lam)`` by adaptive quadrature.

    ``method="area"`` integrates ``(u0 + lam)`` between the turning points
    (the region under the graph above height ``-lam``), ``method="direct"``
    integrates ``F`` over ``(-L, lam)``.  Both are independent of the table
    used by :class:`LambdaMap` and serve as cross-checks.
    """
    lam = float(_check_levels(profile, lam))
    if method == "area":
        xm, xp = (float(v) for v in turning_points(profile, lam))
        g = lambda x: float(profile.u0(np.asarray(x))) + lam
        val, _ = integrate.quad(g, xm, xp, points=[profile.x_peak], epsabs=1e-14, epsrel=1e-13, limit=400)
        return val / (2 * np.pi)
    if method == "direct":
        L = profile.peak
        F = lambda l: float(density(profile, l))
        val, _ = integrate.quad(F, -L * (1 - 1e-15), lam, epsabs=1e-14, epsrel=1e-12, limit=400)
        return val
    raise ValueError(f"unknown method {method!r}")

# }}}


# {{{ the map Lambda

class LambdaMap:
    """Tabulated counting function ``Y`` and its inverse ``Lambda``.

    The interval ``(-L, 0)`` is parametrized by ``s in (0, 1)`` through
    ``lam(s) = -L cos(pi s / 2)^kappa`` with ``kappa = 2p / (2p - 1)``, which
    makes ``F(lam(s)) lam'(s)`` smooth at both ends.  ``Y`` is accumulated
    over ``n_table`` panels with Gauss-Legendre rules; point evaluations and
    the inversion reuse the same panel rule, so results are accurate to
    roughly machine precision.  Values of ``y`` above ``M/2`` are handled
    through the complementary tail ``M - Y`` to keep relative accuracy for
    ``lam`` near zero.

    Parameters
    ----------
    profile : Profile
    n_table : int
        Number of panels (default 4096).
    order : int
        Gauss-Legendre points per panel.
    """

    def __init__(self, profile: Profile, n_table: int = 4096, order: int = 10):
        self.profile = profile
        self.L = profile.peak
        self.kappa = 2.0 * profile.decay_power / (2.0 * profile.decay_power - 1.0)
        self.n_table = int(n_table)
        self._gl_x, self._gl_w = np.polynomial.legendre.leggauss(order)
        self.s_nodes = np.linspace(0.0, 1.0, self.n_table + 1)
        panels = self._panel_integrals(self.s_nodes[:-1], self.s_nodes[1:])
        self.Y_left = np.concatenate([[0.0], np.cumsum(panels)])
        self.Y_right = np.concatenate([np.cumsum(panels[::-1])[::-1], [0.0]])
        self.mass = float(self.Y_left[-1])
        self.lam_nodes = np.concatenate([[-self.L], self.lam_of_s(self.s_nodes[1:-1]), [0.0]])

    # parametrization
    def lam_of_s(self, s):
        c = np.cos(0.5 * np.pi * np.asarray(s, dtype=float))
        return -self.L * c**self.kappa

    def dlam_ds(self, s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(0.5 * np.pi * s), np.sin(0.5 * np.pi * s)
        return self.L * self.kappa * c ** (self.kappa - 1.0) * 0.5 * np.pi * sn

    def s_of_lam(self, lam):
        r = (-np.asarray(lam, dtype=float) / self.L) ** (1.0 / self.kappa)
        return 2.0 / np.pi * np.arccos(np.clip(r, 0.0, 1.0))

    def _integrand(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = (s > 0) & (s < 1)
        if np.any(inside):
            lam = self.lam_of_s(s[inside])
            good = (lam > -self.L) & (lam < 0)
            vals = np.zeros_like(lam)
            vals[good] = density(self.profile, lam[good]) * self.dlam_ds(s[inside][good])
            out[inside] = vals
        return out

    def _panel_integrals(self, a, b):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        nodes = mid[..., None] + half[..., None] * self._gl_x
        return half * (self._integrand(nodes) @ self._gl_w)

    def _locate(self, s):
        return np.clip(np.floor(s * self.n_table).astype(int), 0, self.n_table - 1)

    # forward map
    def cumulative(self, lam) -> np.ndarray:
        """``Y(lam) = int_{-L}^{lam} F``."""
        lam = _check_levels(self.profile, lam)
        s = self.s_of_lam(lam)
        i = self._locate(s)
        return self.Y_left[i] + self._panel_integrals(self.s_nodes[i], s)

    def tail(self, lam) -> np.ndarray:
        """``M - Y(lam) = int_{lam}^0 F`` without cancellation."""
        lam = _check_levels(self.profile, lam)
        s = self.s_of_lam(lam)
        i = self._locate(s)
        return self.Y_right[i + 1] + self._panel_integrals(s, self.s_nodes[i + 1])

    # inverse map
    def __call__(self, y) -> np.ndarray:
        """``Lambda(y)`` for ``y`` in ``(0, M)``."""
        y = np.asarray(y, dtype=float)
        if np.any(~np.isfinite(y)) or np.any(y <= 0) or np.any(y >= self.mass):
            raise DomainError(f"y must lie in (0, M) = (0, {self.mass:.15g})")
        shape = y.shape
        y = y.ravel()
        s = np.empty_like(y)
        upper = y > 0.5 * self.mass
        if np.any(~upper):
            s[~upper] = self._invert(y[~upper], from_left=True)
        if np.any(upper):
            s[upper] = self._invert(self.mass - y[upper], from_left=False)
        return self.lam_of_s(s).reshape(shape)

    def _invert(self, target, from_left: bool):
        table = self.Y_left if from_left else self.Y_right
        if from_left:
            i = np.clip(np.searchsorted(table, target, side="right") - 1, 0, self.n_table - 1)
        else:
            # Y_right decreases with the node index
            i = np.clip(np.searchsorted(-table, -target, side="left") - 1, 0, self.n_table - 1)
        a, b = self.s_nodes[i], self.s_nodes[i + 1]
        ta, tb = table[i], table[i + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(tb != ta, (target - ta) / (tb - ta), 0.5)
        s = a + np.clip(frac, 0.0, 1.0) * (b - a)
        lo, hi = a.copy(), b.copy()
        for _ in range(60):
            if from_left:
                g = ta + self._panel_integrals(a, s) - target
                dg = self._integrand(s)
            else:
                g = tb + self._panel_integrals(s, b) - target
                dg = -self._integrand(s)
            # g is increasing in s for the left form, decreasing for the tail
            increasing = from_left
            above = (g > 0) if increasing else (g < 0)
            hi = np.where(above, s, hi)
            lo = np.where(above, lo, s)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = s - g / dg
            ok = np.isfinite(step) & (step > lo) & (step < hi)
            s_new = np.where(ok, step, 0.5 * (lo + hi))
            if np.all(np.abs(s_new - s) <= 1e-16 * np.maximum(1.0, np.abs(s))):
                s = s_new
                break
            s = s_new
        return s

    def derivative(self, y) -> np.ndarray:
        """``Lambda'(y) = 1 / F(Lambda(y))``."""
        return 1.0 / density(self.profile, self(y))

    def table(self, n: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        """``(y, Lambda(y))`` on the midpoint grid ``y_k = M (k - 1/2) / n``."""
        y = self.mass * (np.arange(1, n + 1) - 0.5) / n
        return y, self(y)


_MAP_CACHE: "weakref.WeakKeyDictionary[Profile, dict]" = weakref.WeakKeyDictionary()


def lambda_map(profile: Profile, n_table: int = 4096) -> LambdaMap:
    """Cached :class:`LambdaMap` for a profile instance."""
    per_profile = _MAP_CACHE.setdefault(profile, {})
    if n_table not in per_profile:
        per_profile[n_table] = LambdaMap(profile, n_table=n_table)
    return per_profile[n_table]

# }}}
