"""Command-line experiment harness.

Every subcommand reads a run configuration (JSON file and/or flags), writes
CSV/JSON artifacts into an output directory, and records a manifest with
content hashes and stage timings.  The output root defaults to the
``BO_ENSEMBLE_OUTPUT`` environment variable, else ``./bo_runs``.

Eigenvalues of ``C(t)`` are cached under ``<root>/.cache`` by a hash of the
ensemble and ``t``.  ``--baseline`` compares the emitted file hashes with an
earlier manifest (exit code 4 on mismatch).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import acceptance
from . import branch_analysis as ba
from . import burgers as bg
from . import microlocal as ml
from .ensemble import quantize
from .profile import PROFILES, get_profile, lambda_map, validate_profile
from .reconstruct import u_from_sigmas
from .spectral import ComplexSpectrum, eig_C

__all__ = ["ConfigError", "RunConfig", "RunManifest", "main", "build_parser"]

OUTPUT_ENV = "BO_ENSEMBLE_OUTPUT"


class ConfigError(ValueError):
    """Invalid run configuration; the message starts with the field path."""


@dataclass
class RunConfig:
    profile: str = "lorentzian"
    profile_params: dict = field(default_factory=dict)
    epsilons: list = field(default_factory=lambda: [2.0 ** -6])
    times: list = field(default_factory=lambda: [1.5])
    x_min: float = -4.0
    x_max: float = 12.0
    n_x: int = 2001
    x0: float = 4.0
    c_out: float = 100.0
    c_split: float = 0.5
    B_bound: float = 10.0
    B_growth: float = 0.0
    r: float = 0.4
    snap: bool = True
    seed: int = 0
    workers: int = 1
    plot_scripts: bool = False
    use_cache: bool = True
    output: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.profile not in PROFILES:
            raise ConfigError(f"profile: unknown profile {self.profile!r}")
        if not self.epsilons:
            raise ConfigError("epsilons: empty list")
        for i, e in enumerate(self.epsilons):
            if not (isinstance(e, (int, float)) and np.isfinite(e) and e > 0):
                raise ConfigError(f"epsilons[{i}]: must be a positive number")
        if not self.times:
            raise ConfigError("times: empty list")
        for i, t in enumerate(self.times):
            if t == "tb":
                continue
            if not (isinstance(t, (int, float)) and np.isfinite(t) and t >= 0):
                raise ConfigError(f"times[{i}]: must be a nonnegative number or 'tb'")
        if not self.x_min < self.x_max:
            raise ConfigError("x_max: must exceed x_min")
        if self.n_x < 2:
            raise ConfigError("n_x: must be at least 2")
        for name in ("c_out", "c_split", "B_bound"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if self.B_growth < 0:
            raise ConfigError("B_growth: must be nonnegative")
        if not 1.0 / 3.0 <= self.r <= 0.5:
            raise ConfigError("r: must lie in [1/3, 1/2]")
        if self.workers < 1:
            raise ConfigError("workers: must be positive")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        for k in data:
            if k not in known:
                raise ConfigError(f"{k}: unknown configuration field")
        return cls(**data).validate()

    def digest(self) -> str:
        d = asdict(self)
        for k in ("output", "workers", "use_cache"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def resolved(self) -> "RunConfig":
        """Copy with ``"tb"`` entries of ``times`` replaced by the breaking time."""
        tb = None
        times = []
        for t in self.times:
            if t == "tb":
                tb = bg.breaking_time(self.profile_obj()) if tb is None else tb
                t = tb
            times.append(float(t))
        out = RunConfig(**asdict(self))
        out.times = times
        return out

    def profile_obj(self):
        return get_profile(self.profile, **self.profile_params)

    def classify_config(self) -> ba.ClassifyConfig:
        return ba.ClassifyConfig(self.c_out, self.c_split, self.B_bound, self.B_growth)

    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)


class RunManifest:
    """Output inventory with content hashes and stage timings."""

    def __init__(self, root: Path, config: RunConfig, command: str):
        self.root = root
        self.config = config
        self.command = command
        self.files: dict = {}
        self.stages: dict = {}
        self.failures: list = []
        self.cache = {"hits": 0, "misses": 0}
        self.baseline: Optional[dict] = None
        self.resolved_times: Optional[list] = None

    def write_text(self, rel: str, text: str) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.files[rel] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def write_json(self, rel: str, data) -> Path:
        return self.write_text(rel, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def stage(self, name: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                manifest.stages[name] = time.perf_counter() - self.t0
                return False
        return _Timer()

    def finish(self) -> Path:
        data = {"command": self.command, "version": __version__,
                "config_hash": self.config.digest(), "config": asdict(self.config),
                "stages_seconds": self.stages, "files": dict(sorted(self.files.items())),
                "failures": self.failures, "cache": self.cache}
        if self.resolved_times is not None:
            data["resolved_times"] = self.resolved_times
        if self.baseline is not None:
            data["baseline"] = self.baseline
        path = self.root / "manifest.json"
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path


# {{{ formatting helpers

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _tag(eps: float, t: Optional[float] = None) -> str:
    s = f"eps{eps:.6g}"
    return s if t is None else f"{s}_t{t:g}"


def _plot_script(csv_name: str, xcol: str, ycols: list, title: str, style: str = "-") -> str:
    return (
        "# standalone plotting script; requires matplotlib\n"
        "import csv\nimport matplotlib.pyplot as plt\n\n"
        f"with open({csv_name!r}) as fh:\n"
        "    rows = list(csv.DictReader(fh))\n"
        f"x = [float(r[{xcol!r}]) for r in rows]\n"
        f"for col in {ycols!r}:\n"
        f"    plt.plot(x, [float(r[col]) for r in rows], {style!r}, label=col)\n"
        f"plt.title({title!r})\nplt.legend()\nplt.show()\n"
    )


def _tasks(cfg: RunConfig, fn, items):
    if cfg.workers == 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))

# }}}


# {{{ subcommands

def cmd_profile(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    with man.stage("profile"):
        validate_profile(p)
        xs = cfg.xs()
        man.write_text("profile/u0.csv", _csv(["x", "u0"], zip(xs, p.u0(xs))))
        lmap = lambda_map(p)
        y, lam = lmap.table(512)
        man.write_text("profile/lambda_map.csv", _csv(["y", "lambda"], zip(y, lam)))
        summary = {"name": p.name, "params": p.params, "L": p.peak, "M": lmap.mass,
                   "p": p.decay_power, "C": p.decay_const, "t_b": bg.breaking_time(p)}
        man.write_json("profile/summary.json", summary)
    return summary


def cmd_ensemble(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    out = {}
    with man.stage("ensemble"):
        for e in cfg.epsilons:
            ens = quantize(p, e, snap=cfg.snap)
            man.write_text(f"ensemble/{_tag(ens.epsilon)}.json", ens.to_json(indent=1) + "\n")
            out[ens.epsilon] = {"N": ens.N, "quantization_residual": ens.quantization_residual(),
                                "last_gap_over_eps": ens.last_gap() / ens.epsilon}
    return out


class SpectrumCache:
    """On-disk cache of eigenvalues of ``C(t)`` keyed by a content hash."""

    def __init__(self, root: Optional[Path], manifest: Optional["RunManifest"] = None):
        self.root = root
        self.manifest = manifest

    @staticmethod
    def key(ens, t: float) -> str:
        desc = {"version": __version__, "profile": ens.profile.name, "params": ens.profile.params,
                "epsilon": repr(ens.epsilon), "N": ens.N, "t": repr(float(t)),
                "lam": hashlib.sha256(ens.lam.tobytes()).hexdigest(),
                "gamma": hashlib.sha256(ens.gamma.tobytes()).hexdigest()}
        return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()

    def _count(self, what: str):
        if self.manifest is not None:
            self.manifest.cache[what] += 1

    def spectrum(self, ens, t: float) -> ComplexSpectrum:
        if self.root is None:
            return eig_C(ens, t, vectors=False)
        path = self.root / f"{self.key(ens, t)}.npz"
        if path.exists():
            with np.load(path) as z:
                self._count("hits")
                return ComplexSpectrum(z["sigma"], None, float(z["residual"]), float(z["norm"]),
                                       float(z["min_spacing"]), str(z["backend"]),
                                       tuple(str(f) for f in z["flags"]))
        sp = eig_C(ens, t, vectors=False)
        self._count("misses")
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f"{path.stem}.{os.getpid()}.{id(sp)}.tmp.npz")
        np.savez(tmp, sigma=sp.sigma, residual=sp.residual, norm=sp.norm,
                 min_spacing=sp.min_spacing, backend=sp.backend, flags=np.array(sp.flags, dtype=str))
        os.replace(tmp, path)
        return sp


_CACHE = SpectrumCache(None)


def _spectrum_task(p, cfg, e, t):
    ens = quantize(p, e, snap=cfg.snap)
    return ens, t, _CACHE.spectrum(ens, t)


def cmd_spectrum(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    with man.stage("spectrum"):
        res = _tasks(cfg, lambda e, t: _spectrum_task(p, cfg, e, t),
                     [(e, t) for e in cfg.epsilons for t in cfg.times])
        for ens, t, sp in res:
            man.write_text(f"spectrum/{_tag(ens.epsilon, t)}.csv",
                           _csv(["mu", "nu"], zip(sp.mu, sp.nu)))
    return len(res)


def cmd_reconstruct(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    xs = cfg.xs()
    with man.stage("reconstruct"):
        res = _tasks(cfg, lambda e, t: _spectrum_task(p, cfg, e, t),
                     [(e, t) for e in cfg.epsilons for t in cfg.times])
        for ens, t, sp in res:
            sets = ba.classify(sp, ens.epsilon, t, p, cfg.classify_config())
            uU, uL, uo = ba.diagnostic_decompose(sp, sets, ens.epsilon, xs)
            u = u_from_sigmas(sp, ens.epsilon, xs)
            name = f"reconstruct/{_tag(ens.epsilon, t)}.csv"
            man.write_text(name, _csv(["x", "u", "u_U", "u_L", "u_o", "route", "epsilon", "t"],
                                      ((x, a, b, c, d, "SIGMA", ens.epsilon, t)
                                       for x, a, b, c, d in zip(xs, u, uU, uL, uo))))
            if cfg.plot_scripts:
                man.write_text(name.replace(".csv", "_plot.py"),
                               _plot_script(Path(name).name, "x", ["u"], f"u at t={t:g}"))
    return len(res)


def cmd_burgers(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    out = {"t_b": bg.breaking_time(p)}
    with man.stage("burgers"):
        for t in cfg.times:
            name = f"burgers/t{t:g}.csv"
            man.write_text(name, bg.to_csv(p, cfg.xs(), t))
            if t > out["t_b"]:
                out[f"caustics(t={t:g})"] = list(bg.caustics(p, t))
            if cfg.plot_scripts:
                man.write_text(name.replace(".csv", "_plot.py"),
                               _plot_script(Path(name).name, "x", ["u0B", "u1B", "u2B", "ubar"],
                                            f"Burgers branches at t={t:g}"))
        man.write_json("burgers/caustics.json", out)
    return out


def cmd_branches(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    counts = {}
    with man.stage("branches"):
        res = _tasks(cfg, lambda e, t: _spectrum_task(p, cfg, e, t),
                     [(e, t) for e in cfg.epsilons for t in cfg.times])
        for ens, t, sp in res:
            sets = ba.classify(sp, ens.epsilon, t, p, cfg.classify_config())
            for key, tab in ba.sampling_tables(sets, sp).items():
                name = f"branches/{_tag(ens.epsilon, t)}_{key}.csv"
                man.write_text(name, tab.to_csv())
                if cfg.plot_scripts:
                    man.write_text(name.replace(".csv", "_plot.py"),
                                   _plot_script(Path(name).name, "y", ["mu", "nu_rescaled"],
                                                f"{key} branch sampling table", "o"))
            counts[_tag(ens.epsilon, t)] = {"N_o": sets.N_o, "N_U": sets.N_U, "N_L": sets.N_L}
        man.write_json("branches/counts.json", counts)
    return counts


def cmd_exponents(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    out = {}
    with man.stage("exponents"):
        for t in cfg.times:
            fit = ba.exponent_sweep(p, cfg.epsilons, t, cfg.classify_config())
            out[f"t={t:g}"] = fit.as_dict()
        man.write_json("exponents/fit.json", out)
    return out


def cmd_whitham(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    out = {}
    with man.stage("whitham"):
        for t in cfg.times:
            tgt = ba.whitham_targets(p, cfg.x0, t)
            rows = {}
            for e in cfg.epsilons:
                ens, _, sp = _spectrum_task(p, cfg, e, t)
                sets = ba.classify(sp, ens.epsilon, t, p, cfg.classify_config())
                f = ba.modulation_fields(ba.sampling_tables(sets, sp), ens.epsilon, cfg.x0, t)
                rows[_tag(ens.epsilon)] = {"psi_U": f.psi_U, "psi_L": f.psi_L, "phi_L": f.phi_L,
                                           "p": f.p, "r": f.r}
            out[f"t={t:g}"] = {"x0": cfg.x0, "targets": {"psi_U": tgt[0], "psi_L": tgt[1],
                                                         "phi_L": tgt[2]}, "fields": rows}
        man.write_json("whitham/fields.json", out)
    return out


def cmd_microlocal(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    with man.stage("microlocal"):
        for t in cfg.times:
            man.write_text(f"microlocal/orbit_t{t:g}.csv", ml.orbit(p, cfg.x0, t).to_csv())
            for e in cfg.epsilons:
                ens = quantize(p, e, snap=cfg.snap)
                s = ml.small_eigs(ens, cfg.x0, t, cfg.r)
                name = f"microlocal/velocities_{_tag(ens.epsilon, t)}.csv"
                man.write_text(name, s.to_csv())
                if cfg.plot_scripts:
                    man.write_text(name.replace(".csv", "_plot.py"),
                                   _plot_script(Path(name).name, "alpha", ["alpha_x"],
                                                "small eigenvalues and velocities", "o"))
    return True


def cmd_bohr(cfg: RunConfig, man: RunManifest):
    p = cfg.profile_obj()
    out = {}
    with man.stage("bohr"):
        for t in cfg.times:
            Xm, Xp = bg.caustics(p, t)
            for e in cfg.epsilons:
                ens = quantize(p, e, snap=cfg.snap)
                cr = ml.zero_crossings(ens, t, (Xm, Xp))
                man.write_text(f"bohr/crossings_{_tag(ens.epsilon, t)}.csv", cr.to_csv())
                bs = ml.bohr_sommerfeld(p, cfg.x0, t, ens.epsilon, cr)
                d = bs.as_dict()
                for lab in (ml.FAST, ml.SLOW):
                    r = ml.spacing_ratios(cr, p, lab)
                    d[f"median_spacing_ratio_{lab}"] = float(np.nanmedian(r)) if r.size else None
                out[_tag(ens.epsilon, t)] = d
        man.write_json("bohr/report.json", out)
    return out


def cmd_verify(cfg: RunConfig, man: RunManifest, only=None):
    with man.stage("verify"):
        results = acceptance.run_all(only, echo=print)
        man.write_json("verify/report.json", [r.as_dict() for r in results])
    man.failures = [r.number for r in results if not r.passed]
    return all(r.passed for r in results)


COMMANDS = {
    "profile": cmd_profile, "ensemble": cmd_ensemble, "spectrum": cmd_spectrum,
    "reconstruct": cmd_reconstruct, "burgers": cmd_burgers, "branches": cmd_branches,
    "exponents": cmd_exponents, "whitham": cmd_whitham, "microlocal": cmd_microlocal,
    "bohr": cmd_bohr, "verify": cmd_verify,
}

# }}}


def _time_arg(text: str):
    if text == "tb":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid time {text!r}") from None


def compare_baseline(man: RunManifest, path: Path) -> dict:
    """Compare emitted file hashes with a previous manifest."""
    try:
        base = json.loads(Path(path).read_text())["files"]
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"baseline: cannot read manifest {path}: {exc}") from exc
    report = {"path": str(path),
              "changed": sorted(k for k in base if k in man.files and man.files[k] != base[k]),
              "missing": sorted(k for k in base if k not in man.files),
              "new": sorted(k for k in man.files if k not in base)}
    report["match"] = not (report["changed"] or report["missing"])
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bo-ensemble", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} stage")
        sp.add_argument("--config", type=Path, help="JSON run configuration")
        sp.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ENV} or ./bo_runs)")
        sp.add_argument("--profile")
        sp.add_argument("--eps", type=float, nargs="+", dest="epsilons")
        sp.add_argument("--eps-pow", type=int, nargs="+",
                        help="dispersion values as powers: 6 means 2^-6")
        sp.add_argument("--t", type=_time_arg, nargs="+", dest="times",
                        help="times; 'tb' stands for the breaking time")
        sp.add_argument("--x-min", type=float)
        sp.add_argument("--x-max", type=float)
        sp.add_argument("--n-x", type=int)
        sp.add_argument("--x0", type=float)
        sp.add_argument("--c-out", type=float)
        sp.add_argument("--c-split", type=float)
        sp.add_argument("--B-bound", type=float, dest="B_bound")
        sp.add_argument("--B-growth", type=float, dest="B_growth")
        sp.add_argument("--r", type=float)
        sp.add_argument("--no-snap", action="store_true")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--plot-scripts", action="store_true")
        sp.add_argument("--no-cache", action="store_true", help="recompute every spectrum")
        sp.add_argument("--baseline", type=Path,
                        help="manifest of an earlier run; differing outputs give exit code 4")
        if name == "verify":
            sp.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    return parser


def load_config(args) -> RunConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
    flags = {k: getattr(args, k) for k in ("profile", "epsilons", "times", "x_min", "x_max", "n_x",
                                           "x0", "c_out", "c_split", "B_bound", "B_growth", "r",
                                           "seed", "workers")}
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.eps_pow:
        data["epsilons"] = [2.0 ** -k for k in args.eps_pow]
    if args.no_snap:
        data["snap"] = False
    if args.plot_scripts:
        data["plot_scripts"] = True
    if args.no_cache:
        data["use_cache"] = False
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    base = Path(args.out or cfg.output or os.environ.get(OUTPUT_ENV, "bo_runs"))
    root = base / args.command
    root.mkdir(parents=True, exist_ok=True)
    man = RunManifest(root, cfg, args.command)
    global _CACHE
    _CACHE = SpectrumCache(base / ".cache" if cfg.use_cache else None, man)
    ok = True
    try:
        run_cfg = cfg.resolved()
        if run_cfg.times != cfg.times:
            man.resolved_times = run_cfg.times
        if args.command == "verify":
            ok = cmd_verify(run_cfg, man, args.only)
        else:
            result = COMMANDS[args.command](run_cfg, man)
            if isinstance(result, dict):
                print(json.dumps(result, indent=2, sort_keys=True, default=float))
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        # numerical or domain failure: keep the partial outputs and the manifest
        man.failures.append(f"{type(exc).__name__}: {exc}")
        man.finish()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    code = 0 if ok else 1
    if args.baseline is not None:
        try:
            man.baseline = compare_baseline(man, args.baseline)
        except ConfigError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            code = 2
        else:
            if not man.baseline["match"]:
                print(f"baseline mismatch: changed {man.baseline['changed']}, "
                      f"missing {man.baseline['missing']}", file=sys.stderr)
                code = code or 4
    path = man.finish()
    print(f"manifest: {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
