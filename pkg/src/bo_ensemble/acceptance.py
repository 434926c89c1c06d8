"""Acceptance suite: thirteen quantitative checks on the Lorentzian test case.

Each check returns a ``CriterionResult`` with the measured values, the
expectation, and the wall time.  ``run_all`` executes the suite and is used
by both the command line (``bo-ensemble verify``) and the test suite.
Independent reference values (closed-form cubic roots, breaking time and the
like) are computed here directly rather than through the modules under test.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from . import branch_analysis as ba
from . import microlocal as ml
from .burgers import branches_grid, breaking_time, caustics
from .ensemble import quantize
from .profile import lorentzian
from .reconstruct import cm_flow, u_alpha, u_from_sigmas, u_logdet_fd
from .spectral import alpha_velocities, eig_A, eig_C

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all"]

SEED = 20240917

# closed-form branches of 9u^3 - 24u^2 + 17u - 2 = (u - 1)(9u^2 - 15u + 2) at (4, 1.5)
_U0B = (15.0 - np.sqrt(153.0)) / 18.0
_U1B = 1.0
_U2B = (15.0 + np.sqrt(153.0)) / 18.0
WHITHAM_TARGETS = (_U0B, _U2B - _U1B, 0.5 * np.log((_U2B - _U0B) / (_U1B - _U0B)))


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    expected: str
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.number:2d} {self.name}: {meas} (expected {self.expected}; {self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "measured": {k: _jsonable(v) for k, v in self.measured.items()},
                "expected": self.expected, "seconds": self.seconds, "notes": self.notes}


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _strictly_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


# {{{ criteria

def c01_breaking_time():
    t0 = time.perf_counter()
    tb = breaking_time(lorentzian())
    dt = time.perf_counter() - t0
    err = abs(tb - 2.0 * np.sqrt(3.0) / 9.0)
    return err <= 1e-8 and dt < 1.0, {"t_b": tb, "abs_err": err, "runtime_s": dt}, \
        "|t_b - 2 sqrt(3)/9| <= 1e-8, < 1 s"


def c02_caustics():
    t0 = time.perf_counter()
    Xm, Xp = caustics(lorentzian(), 1.5)
    dt = time.perf_counter() - t0
    ok = 3.18 <= Xm <= 3.22 and 6.02 <= Xp <= 6.06 and dt < 1.0
    return ok, {"X_minus": Xm, "X_plus": Xp, "runtime_s": dt}, \
        "X- in [3.18, 3.22], X+ in [6.02, 6.06], < 1 s"


def c03_route_equivalence():
    p = lorentzian()
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    ens = quantize(p, 2.0 ** -5)
    worst_as = 0.0
    for _ in range(20):
        x, t = rng.uniform(-4.0, 10.0), rng.uniform(0.0, 1.5)
        ua = u_alpha(ens, x, t)
        us = float(u_from_sigmas(eig_C(ens, t, vectors=False), ens.epsilon, x))
        worst_as = max(worst_as, abs(ua - us) / max(1.0, ua))
    e8 = quantize(p, N=8)
    worst_ld = 0.0
    for _ in range(20):
        x, t = rng.uniform(-4.0, 10.0), rng.uniform(0.0, 1.5)
        ul = u_logdet_fd(e8, x, t)
        ua = u_alpha(e8, x, t)
        us = float(u_from_sigmas(eig_C(e8, t, vectors=False), e8.epsilon, x))
        worst_ld = max(worst_ld, abs(ua - ul), abs(us - ul))
    dt = time.perf_counter() - t0
    ok = worst_as < 1e-8 and worst_ld < 1e-6 and dt < 10.0
    return ok, {"N": ens.N, "max_rel_alpha_sigma": worst_as, "max_abs_vs_logdet_N8": worst_ld,
                "runtime_s": dt}, "ALPHA/SIGMA < 1e-8 relative, LOGDET (N=8) < 1e-6, < 10 s"


def c04_spectral_bounds():
    p = lorentzian()
    L = p.peak
    rng = np.random.default_rng(SEED + 4)
    t0 = time.perf_counter()
    lower_ratio = np.inf   # min nu / (L eps / 2)
    upper_ratio = 0.0      # max nu / (eps / (2 |lam_N|))
    corrected = np.inf     # min nu / (eps / (2 L))
    ax_ok = at_ok = True
    for k in (5, 6, 7):
        ens = quantize(p, 2.0 ** -k)
        eps = ens.epsilon
        for t in (0.0, 1.0):
            nu = eig_C(ens, t, vectors=False).nu
            lower_ratio = min(lower_ratio, nu.min() / (0.5 * L * eps))
            upper_ratio = max(upper_ratio, nu.max() / (eps / (2.0 * abs(ens.lam[-1]))))
            corrected = min(corrected, nu.min() / (eps / (2.0 * L)))
            for x in rng.uniform(-4.0, 10.0, 5):
                ax, at = alpha_velocities(eig_A(ens, x, t), ens)
                ax_ok &= bool(np.all((ax > 0) & (ax < 2 * L)))
                at_ok &= bool(np.all((at < 0) & (at > -4 * L * L)))
    dt = time.perf_counter() - t0
    ok = lower_ratio > 1.0 and upper_ratio < 1.0 and ax_ok and at_ok and dt < 60.0
    return ok, {"min_nu_over_half_L_eps": lower_ratio,
                "max_nu_over_eps_over_2abs_lamN": upper_ratio,
                "min_nu_over_eps_over_2L": corrected,
                "alpha_x_in_range": ax_ok, "alpha_t_in_range": at_ok, "runtime_s": dt}, \
        "L eps/2 < nu < eps/(2|lam_N|), 0 < alpha_x < 2L, -4L^2 < alpha_t < 0, < 60 s"


def c05_calogero_moser():
    t0 = time.perf_counter()
    res = cm_flow(quantize(lorentzian(), N=16), 0.0, 0.2, tol=1e-10)
    dt = time.perf_counter() - t0
    return res.deviation < 1e-6 and dt < 30.0, {"max_matched_deviation": res.deviation,
                                                 "runtime_s": dt}, "< 1e-6, < 30 s"


def c06_exponents():
    p = lorentzian()
    t0 = time.perf_counter()
    eps = [2.0 ** -k for k in range(6, 11)]
    meas, ok = {}, True
    for t in (0.0, 1.5):
        fit = ba.exponent_sweep(p, eps, t)
        for name in ("q_minus", "q_plus", "r_minus", "r_plus"):
            v = getattr(fit, name)
            lo, hi = (0.97, 1.03) if name[0] == "q" else (1.78, 1.89)
            ok &= lo <= v <= hi and fit.r2[name] >= 0.995
            meas[f"{name}(t={t:g})"] = v
        meas[f"min_R2(t={t:g})"] = min(fit.r2.values())
        meas[f"n_outliers(t={t:g})"] = list(fit.n_outliers)
    dt = time.perf_counter() - t0
    meas["runtime_s"] = dt
    return ok and dt < 900.0, meas, "q in [0.97, 1.03], r in [1.78, 1.89], R^2 >= 0.995, < 15 min"


def _fields(k: int, x0: float = 4.0, t: float = 1.5):
    p = lorentzian()
    ens = quantize(p, 2.0 ** -k)
    sp = eig_C(ens, t, vectors=False)
    sets = ba.classify(sp, ens.epsilon, t, p)
    tables = ba.sampling_tables(sets, sp)
    return ens, sp, ba.modulation_fields(tables, ens.epsilon, x0, t)


def c07_whitham():
    res = {}
    for k in (6, 8, 9):
        _, _, f = _fields(k)
        res[k] = [abs(v - g) for v, g in zip((f.psi_U, f.psi_L, f.phi_L), WHITHAM_TARGETS)]
    names = ("psi_U", "psi_L", "phi_L")
    dec = all(_strictly_decreasing([res[k][i] for k in (6, 8, 9)]) for i in range(3))
    rel9 = [res[9][i] / WHITHAM_TARGETS[i] for i in range(3)]
    meas = {f"abs_res_{n}": [res[k][i] for k in (6, 8, 9)] for i, n in enumerate(names)}
    meas["rel_res_eps_2^-9"] = rel9
    return dec and max(rel9) < 0.10, meas, \
        "residuals strictly decrease over eps = 2^-6, 2^-8, 2^-9; relative < 10% at 2^-9"


def c08_periodic_profile():
    rms, amp, phases = [], None, []
    for k in (6, 7, 8):
        ens, sp, f = _fields(k)
        w = ens.epsilon ** 0.75
        x = np.linspace(4.0 - w, 4.0 + w, 801)
        u = u_from_sigmas(sp, ens.epsilon, x)
        rms.append(float(np.sqrt(np.mean((u - ba.periodic_profile(f, x)) ** 2))))
        phases.append(f.p)
        amp = ba.wave_amplitude(f)
    ratio = rms[-1] / amp
    return _strictly_decreasing(rms) and ratio < 0.10, \
        {"rms": rms, "phase_p": phases, "amplitude_eps_2^-8": amp, "rms_over_amplitude": ratio}, \
        "RMS strictly decreasing over eps = 2^-6, 2^-7, 2^-8; < 10% of amplitude at 2^-8"


def c09_series_identity():
    rng = np.random.default_rng(SEED + 9)
    worst = 0.0
    worst_tail = 0.0
    for _ in range(10):
        Om, tau = rng.uniform(0.05, 2.0), rng.uniform(-2.0, 2.0)
        exact = ba.comb_closed_form(Om, tau)
        worst = max(worst, abs(ba.comb_sum(Om, tau, 10 ** 4) - exact) / exact)
        worst_tail = max(worst_tail, abs(ba.comb_sum(Om, tau, 10 ** 4, tail=True) - exact) / exact)
    return worst < 1e-6, {"max_rel_err_truncated": worst,
                          "max_rel_err_tail_corrected": worst_tail}, \
        "truncated sum |j| <= 1e4 within 1e-6 relative"


def c10_crossing_spacing():
    p = lorentzian()
    t0 = time.perf_counter()
    Xm, Xp = caustics(p, 1.5)
    ens = quantize(p, 2.0 ** -8)
    cr = ml.zero_crossings(ens, 1.5, (Xm + 0.3, Xp - 0.3))
    fast = np.nanmedian(ml.spacing_ratios(cr, p, ml.FAST))
    slow = np.nanmedian(ml.spacing_ratios(cr, p, ml.SLOW))
    dt = time.perf_counter() - t0
    ok = abs(fast - 1.0) <= 0.15 and abs(slow - 1.0) <= 0.15 and dt < 600.0
    return ok, {"median_fast_ratio": fast, "median_slow_ratio": slow,
                "n_fast": int(np.sum(cr.labels == ml.FAST)),
                "n_slow": int(np.sum(cr.labels == ml.SLOW)),
                "n_ambiguous": int(np.sum(cr.labels == ml.AMBIGUOUS)), "runtime_s": dt}, \
        "median spacing / (2 pi eps / f) within 15% for FAST and SLOW"


def c11_density():
    p = lorentzian()
    devs = []
    for k in (6, 7, 8):
        ens = quantize(p, 2.0 ** -k)
        alpha = eig_A(ens, 4.0, 1.5).alpha
        devs.append(ml.cdf_deviation(alpha, ens.epsilon, p, 4.0, 1.5, ens.epsilon ** (1.0 / 3.0)))
    return _strictly_decreasing(devs), {"sup_deviation": devs}, \
        "sup deviation strictly decreasing over eps = 2^-6, 2^-7, 2^-8"


def c12_wkb():
    p = lorentzian()
    x, t = 3.25, 1.0
    ens = quantize(p, 2.0 ** -8)
    s = ml.small_eigs(ens, x, t)
    slow = s.of(ml.SLOW)
    fast = s.of(ml.FAST)
    meas, ok = {}, True
    if slow.size:
        v = s.vectors[:, slow[0]]
        fit = ml.wkb_amplitude_fit(ens, v, x, t)[0]
        dev = ml.phase_shift_deviation(ens, v, x, t)
        meas.update(slow_alpha=float(s.alpha[slow[0]]), slow_rms_over_peak=fit.rms,
                    slow_phase_deviation=dev)
        ok &= fit.rms < 0.15 and dev < 0.05
    else:
        meas["slow"] = "none"
        ok = False
    if fast.size:
        v = s.vectors[:, fast[0]]
        frac = ml.wkb_amplitude_fit(ens, v, x, t)[0].fraction
        meas.update(fast_alpha=float(s.alpha[fast[0]]), fast_alpha_x=float(s.alpha_x[fast[0]]),
                    fast_right_fraction=frac)
        ok &= 0.6 <= frac <= 0.9
    else:
        meas["fast"] = "none"
        ok = False
    return ok, meas, "slow RMS/peak < 0.15, phase deviation < 0.05 rad, fast fraction in [0.6, 0.9]"


def c13_weak_limit():
    p = lorentzian()
    t = 1.5
    x = np.linspace(-4.0, 12.0, 40001)
    ubar = branches_grid(p, x, t)["ubar"]
    phi = np.exp(-(x - 4.0) ** 2)
    vals = []
    for k in (5, 6, 7):
        ens = quantize(p, 2.0 ** -k)
        u = u_from_sigmas(eig_C(ens, t, vectors=False), ens.epsilon, x)
        vals.append(float(trapezoid((u - ubar) * phi, x)))
    mags = [abs(v) for v in vals]
    return _strictly_decreasing(mags), {"pairing": vals}, \
        "|int (u - ubar) phi| strictly decreasing over eps = 2^-5, 2^-6, 2^-7"

# }}}


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("breaking time", c01_breaking_time),
    2: ("caustics", c02_caustics),
    3: ("route equivalence", c03_route_equivalence),
    4: ("spectral bounds", c04_spectral_bounds),
    5: ("Calogero-Moser consistency", c05_calogero_moser),
    6: ("exponent fits", c06_exponents),
    7: ("Whitham identification", c07_whitham),
    8: ("oscillatory profile", c08_periodic_profile),
    9: ("comb series identity", c09_series_identity),
    10: ("zero-crossing spacing", c10_crossing_spacing),
    11: ("density law", c11_density),
    12: ("WKB checks", c12_wkb),
    13: ("weak limit", c13_weak_limit),
}


def run_criterion(number: int) -> CriterionResult:
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    ok, meas, expected = fn()
    return CriterionResult(number, name, bool(ok), meas, expected, time.perf_counter() - t0)


def run_all(numbers=None, echo: Callable[[str], None] = None) -> list:
    out = []
    for n in numbers or sorted(CRITERIA):
        r = run_criterion(n)
        if echo is not None:
            echo(r.line())
        out.append(r)
    return out
