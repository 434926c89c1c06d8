"""Multivalued solution of the inviscid Burgers equation ``u_t + 2 u u_x = 0``.

The solution with ``u(x, 0) = u0(x)`` is given implicitly by
``u = u0(x - 2 t u)``.  For ``t > t_b`` and ``X-(t) < x < X+(t)`` there are
three branches ``u0B < u1B < u2B``; elsewhere one.  The weak limit of the
dispersive problem is the alternating sum ``u0B - u1B + u2B``.

For Lorentzian profiles ``a / (1 + (x - c)^2)`` the implicit equation is the
cubic ``4 t^2 u^3 - 4 t z u^2 + (1 + z^2) u - a = 0`` with ``z = x - c`` and
is solved in closed form; other profiles use a sampled characteristic fan
with bracketed refinement.
"""

from __future__ import annotations

import csv
import io
import weakref
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq, fsolve, minimize_scalar

from .profile import DomainError, Profile

__all__ = [
    "BurgersBranches",
    "CausticData",
    "branches",
    "branches_grid",
    "breaking_time",
    "breaking_time_discriminant",
    "caustics",
    "caustics_discriminant",
    "caustic_data",
    "cubic_coefficients",
    "discriminant",
    "weak_limit",
    "implicit_residual",
    "to_csv",
]

FAN_SAMPLES = 2048
DEGENERATE_TOL = 1e-6
TINY_T = 1e-8


@dataclass(frozen=True)
class BurgersBranches:
    """Sorted real branch values at ``(x, t)``."""

    x: float
    t: float
    values: tuple
    degenerate: bool = False

    @property
    def region(self) -> str:
        return "TRIPLE" if len(self.values) == 3 else "SINGLE"

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def ubar(self) -> float:
        return float(sum((-1) ** k * v for k, v in enumerate(self.values)))


@dataclass(frozen=True)
class CausticData:
    """Breaking time and caustic positions at a given ``t``."""

    t_b: float
    t: float
    X_minus: float
    X_plus: float


def _lorentzian_params(profile: Profile):
    """``(a, c)`` if the profile is a (possibly rescaled) Lorentzian, else None."""
    if not profile.name.startswith("lorentzian"):
        return None
    p = profile.params
    if "amplitude" not in p:
        return None
    return p["amplitude"] * p.get("amplitude_factor", 1.0), p.get("center", 0.0)


def cubic_coefficients(profile: Profile, x: float, t: float) -> np.ndarray:
    """Coefficients (highest first) of the Lorentzian cubic in ``u``."""
    ac = _lorentzian_params(profile)
    if ac is None:
        raise ValueError("cubic form exists only for Lorentzian profiles")
    a, c = ac
    z = x - c
    return np.array([4.0 * t * t, -4.0 * t * z, 1.0 + z * z, -a])


def discriminant(profile: Profile, x: float, t: float) -> float:
    """Discriminant of the Lorentzian cubic; positive iff three real roots."""
    A, B, C, D = cubic_coefficients(profile, x, t)
    return float(18 * A * B * C * D - 4 * B ** 3 * D + B * B * C * C
                 - 4 * A * C ** 3 - 27 * A * A * D * D)


def implicit_residual(profile: Profile, x: float, t: float, u) -> np.ndarray:
    """``u - u0(x - 2 t u)``."""
    u = np.asarray(u, dtype=float)
    return u - profile.u0(x - 2.0 * t * u)


def _polish(profile: Profile, x: float, t: float, u: float) -> float:
    # Newton on g(u) = u - u0(x - 2tu); g' = 1 + 2t u0'(x - 2tu)
    for _ in range(6):
        xi = x - 2.0 * t * u
        g = u - profile.u0(xi)
        dg = 1.0 + 2.0 * t * profile.du0(xi)
        if dg == 0:
            break
        step = float(g / dg)
        u -= step
        if abs(step) <= 1e-16 * max(1.0, abs(u)):
            break
    return float(u)


def _branches_cubic(profile: Profile, x: float, t: float):
    if t == 0:
        return (float(profile.u0(x)),), False
    coeffs = cubic_coefficients(profile, x, t)
    roots = np.roots(coeffs)
    disc = discriminant(profile, x, t)
    scale = np.max(np.abs(coeffs)) ** 4
    degenerate = abs(disc) <= 1e-12 * scale
    if disc > 0:
        vals = np.sort(roots.real)
    else:
        vals = np.array([roots[np.argmin(np.abs(roots.imag))].real])
    return tuple(_polish(profile, x, t, v) for v in vals), degenerate


def _branches_fan(profile: Profile, x: float, t: float):
    if t == 0:
        return (float(profile.u0(x)),), False
    L = profile.peak
    # characteristic foot xi = x - 2 t u with u in (0, L]
    xi = np.linspace(x - 2.0 * t * L, x, FAN_SAMPLES)
    g = xi + 2.0 * t * profile.u0(xi) - x
    vals = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
        if g[i] == 0:
            root = xi[i]
        elif g[i + 1] == 0:
            continue
        else:
            root = brentq(lambda s: s + 2.0 * t * profile.u0(s) - x, xi[i], xi[i + 1],
                          xtol=1e-15, rtol=1e-15)
        vals.append(float(profile.u0(root)))
    vals = sorted(set(vals))
    degenerate = len(vals) not in (1, 3)
    return tuple(vals), degenerate


def branches(profile: Profile, x: float, t: float, *, method: str = "auto") -> BurgersBranches:
    """All real solutions of ``u = u0(x - 2 t u)``.

    Parameters
    ----------
    method : {"auto", "cubic", "fan"}
        ``auto`` uses the closed form when the profile is Lorentzian.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    if method == "auto":
        method = "cubic" if _lorentzian_params(profile) is not None else "fan"
    if method not in ("cubic", "fan"):
        raise ValueError(f"unknown method {method!r}")
    if t <= TINY_T * breaking_time(profile):
        # |u - u0(x)| <= t L / t_b: one Newton polish from u0(x) is exact to roundoff,
        # and the cubic coefficients or the fan bracket would underflow
        return BurgersBranches(float(x), float(t), (_polish(profile, x, t, float(profile.u0(x))),))
    if method == "cubic":
        vals, degen = _branches_cubic(profile, float(x), float(t))
    elif method == "fan":
        vals, degen = _branches_fan(profile, float(x), float(t))
    else:
        raise ValueError(f"unknown method {method!r}")
    if len(vals) == 3 and t > 0:
        try:
            cd = caustics(profile, t)
            if min(abs(x - cd[0]), abs(x - cd[1])) < DEGENERATE_TOL:
                degen = True
        except DomainError:
            pass
    return BurgersBranches(float(x), float(t), vals, bool(degen))


def weak_limit(profile: Profile, x: float, t: float) -> float:
    """Alternating sum ``sum_n (-1)^n u_nB`` of the branches."""
    return branches(profile, x, t).ubar


def branches_grid(profile: Profile, xs, t: float) -> dict:
    """Branch table on a grid: keys x, n, u0B, u1B, u2B, ubar, degenerate."""
    xs = np.asarray(xs, dtype=float)
    out = {k: np.full(xs.shape, np.nan) for k in ("u0B", "u1B", "u2B", "ubar")}
    out["n"] = np.zeros(xs.shape, dtype=int)
    out["degenerate"] = np.zeros(xs.shape, dtype=bool)
    for i, x in enumerate(xs):
        b = branches(profile, x, t)
        out["n"][i] = b.n
        out["degenerate"][i] = b.degenerate
        out["ubar"][i] = b.ubar
        if b.n == 3:
            out["u0B"][i], out["u1B"][i], out["u2B"][i] = b.values
        else:
            out["u0B"][i] = b.values[0]
    out["x"] = xs
    return out


def to_csv(profile: Profile, xs, t: float) -> str:
    """CSV with columns x, t, n_branches, u0B, u1B, u2B, ubar."""
    g = branches_grid(profile, xs, t)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "t", "n_branches", "u0B", "u1B", "u2B", "ubar"])
    for i in range(g["x"].size):
        w.writerow([f"{g['x'][i]:.16e}", f"{t:.16e}", int(g["n"][i]),
                    *(f"{g[k][i]:.16e}" for k in ("u0B", "u1B", "u2B", "ubar"))])
    return buf.getvalue()


# {{{ breaking time and caustics

def _steepest_descent_point(profile: Profile) -> float:
    """Location of the minimum of ``u0'`` to the right of the maximum."""
    x0 = profile.x_peak
    width = 1.0
    while profile.u0(x0 + width) > 0.5 * profile.peak and width < 1e6:
        width *= 2.0
    grid = x0 + np.linspace(0.0, 8.0 * width, 4097)[1:]
    i = int(np.argmin(profile.du0(grid)))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(profile.du0, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


_TB_CACHE: "weakref.WeakKeyDictionary[Profile, float]" = weakref.WeakKeyDictionary()


def breaking_time(profile: Profile) -> float:
    """``t_b = 1 / (2 max(-u0'))``: first crossing of characteristics."""
    if profile not in _TB_CACHE:
        xi = _steepest_descent_point(profile)
        _TB_CACHE[profile] = float(-1.0 / (2.0 * profile.du0(xi)))
    return _TB_CACHE[profile]


def breaking_time_discriminant(profile: Profile) -> float:
    """Independent ``t_b`` for Lorentzians: the triple root of the cubic.

    Solves ``P = P' = P'' = 0`` in ``(u, z, t)``.
    """
    ac = _lorentzian_params(profile)
    if ac is None:
        raise ValueError("discriminant oracle exists only for Lorentzian profiles")
    a, _ = ac

    def eqs(v):
        u, z, t = v
        return [4 * t * t * u ** 3 - 4 * t * z * u * u + (1 + z * z) * u - a,
                12 * t * t * u * u - 8 * t * z * u + 1 + z * z,
                24 * t * t * u - 8 * t * z]

    # start from the steepest-descent guess
    t0 = breaking_time(profile)
    z0 = _steepest_descent_point(profile) - profile.x_peak
    u0 = float(profile.u0(profile.x_peak + z0))
    sol, info, ier, msg = fsolve(eqs, [u0, z0 + 2 * t0 * u0, t0], full_output=True, xtol=1e-13)
    # stagnation at roundoff level is acceptable
    if ier != 1 and np.max(np.abs(info["fvec"])) > 1e-12:
        raise RuntimeError(f"triple-root solve failed: {msg}")
    return float(sol[2])


_CAUSTIC_CACHE: "weakref.WeakKeyDictionary[Profile, dict]" = weakref.WeakKeyDictionary()


def caustics(profile: Profile, t: float) -> tuple[float, float]:
    """``(X-(t), X+(t))`` from the roots of ``1 + 2 t u0'(xi) = 0``."""
    cache = _CAUSTIC_CACHE.setdefault(profile, {})
    key = float(t)
    if key not in cache:
        cache[key] = _caustics(profile, key)
    return cache[key]


def _caustics(profile: Profile, t: float) -> tuple[float, float]:
    t_b = breaking_time(profile)
    if t <= t_b:
        raise DomainError(f"t={t:g} does not exceed the breaking time {t_b:.6g}")
    xs = _steepest_descent_point(profile)
    f = lambda s: 1.0 + 2.0 * t * profile.du0(s)
    lo = profile.x_peak
    hi = xs + 1.0
    while f(hi) <= 0:
        hi = xs + 2.0 * (hi - xs)
    xi1 = brentq(f, lo, xs, xtol=1e-15, rtol=1e-15)
    xi2 = brentq(f, xs, hi, xtol=1e-15, rtol=1e-15)
    X = sorted(float(s + 2.0 * t * profile.u0(s)) for s in (xi1, xi2))
    return X[0], X[1]


def caustics_discriminant(profile: Profile, t: float) -> tuple[float, float]:
    """Caustics of a Lorentzian as the real roots of the cubic discriminant in ``x``."""
    ac = _lorentzian_params(profile)
    if ac is None:
        raise ValueError("discriminant oracle exists only for Lorentzian profiles")
    a, c = ac
    z = Polynomial([0.0, 1.0])
    A, B, C, D = 4.0 * t * t, -4.0 * t * z, 1.0 + z * z, -a
    disc = 18 * A * B * C * D - 4 * B ** 3 * D + B * B * C * C - 4 * A * C ** 3 - 27 * A * A * D * D
    roots = disc.roots()
    real = np.sort(roots[np.abs(roots.imag) < 1e-7 * np.maximum(1, np.abs(roots))].real)
    if real.size != 2:
        raise DomainError("caustics require exactly two real discriminant roots")
    return float(real[0] + c), float(real[1] + c)


def caustic_data(profile: Profile, t: float) -> CausticData:
    X = caustics(profile, t)
    return CausticData(breaking_time(profile), float(t), X[0], X[1])

# }}}
