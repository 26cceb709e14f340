"""Command-line front end.

Runs are described by a YAML file whose physical keys carry their units
(``..._ns``, ``..._mhz``).  Internally everything is in natural units with
``gamma_prime = 1``.  Example::

    model: modes
    seed: 0
    physics: {gamma_prime_mhz: 5.2, od: 11.6, n_atoms: 40, placement: disordered}
    pulse: {fwhm_ns: 10, center_ns: 20}
    grid: {t_start_ns: 0, t_end_ns: 150, n_samples: 3001}

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import (MODELS, apply_background, find_features, fit_decay, max_deviation,
                       relative_l2, run_model, sweep_od)
from .collective import diagonalize, lattice_array, make_array, transmission_function
from .continuum import (LogNormalSpec, broadened_function, continuum_function, read_components_csv,
                        sample_components, write_components_csv)
from .core import GaussianPulse, PhysicalParams, SampledDrive, UnitSystem, read_drive_csv
from .spectral import GridPolicy

log = logging.getLogger("dynbeats")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# guided-to-free-space coupling used when only one of n_atoms / od is given
DEFAULT_GAMMA_1D_RATIO = 0.03

DEFAULTS = {
    "model": "modes",
    "seed": 0,
    "physics": {"gamma_prime_mhz": 5.2, "kd": math.pi / 2, "placement": "disordered"},
    "pulse": {"fwhm_ns": 10.0, "center_ns": 20.0, "detuning_mhz": 0.0},
    "grid": {"t_start_ns": 0.0, "t_end_ns": 150.0, "n_samples": 3001,
             "span_factor": 40.0, "n_points": 2**13},
    "spectrum": {"delta_min_mhz": -60.0, "delta_max_mhz": 60.0, "n_points": 2001,
                 "per_component": False},
    "broadening": {"n_components": 12, "median_shift_mhz": 2.6, "shape": 0.6, "direction": 1},
    "analysis": {"fit_upper": 0.8, "fit_lower": 0.2, "offset_ns": 1.1, "background": 0.0},
    "sweep": {"od": [3, 6, 10, 15, 20, 30], "fwhm_ns": [10.0, 13.0], "t_end_ns": 300.0,
              "n_samples": 8001},
    "compare": {"models": ["modes", "hl", "spectral"]},
    "output": {"prefix": "run"},
}

# pairs whose agreement is a contract: (pair, tolerance, only above this intensity)
ORACLE_PAIRS = {
    frozenset({"modes", "hl"}): (1e-4, 0.0),
    frozenset({"modes", "spectral"}): (1e-4, 0.0),
    frozenset({"hl", "spectral"}): (1e-4, 0.0),
    frozenset({"bessel", "continuum"}): (1e-4, 1e-8),
}
MIRROR_TOL = 1e-8


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# -- configuration -------------------------------------------------------------

def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    data["_base_dir"] = str(p.resolve().parent)
    return data


def _num(section: dict, key: str, where: str, *, positive=False, nonneg=False):
    v = section.get(key)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}.{key} must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key} must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key} must be non-negative")
    return v


def _resolve_physics(phys: dict) -> dict:
    """Fill in whichever of (n_atoms, od, gamma_1d_ratio) is missing."""
    n = phys.get("n_atoms")
    depth = _num(phys, "od", "physics", nonneg=True)
    ratio = _num(phys, "gamma_1d_ratio", "physics", nonneg=True)
    if n is not None and (isinstance(n, bool) or not isinstance(n, int) or n < 1):
        raise ConfigError("physics.n_atoms must be a positive integer")
    if n is None and depth is None:
        raise ConfigError("physics needs n_atoms or od")
    if ratio is None and (n is None or depth is None):
        ratio = DEFAULT_GAMMA_1D_RATIO
    if n is None:
        if ratio == 0:
            raise ConfigError("physics.gamma_1d_ratio must be positive to derive n_atoms")
        n = max(1, round(depth / (2.0 * ratio)))
        ratio = depth / (2.0 * n)
    elif depth is None:
        depth = 2.0 * n * ratio
    elif ratio is None:
        ratio = depth / (2.0 * n)
    elif abs(2.0 * n * ratio - depth) > 1e-9 * max(depth, 1.0):
        raise ConfigError("physics: n_atoms, od and gamma_1d_ratio are inconsistent (od = 2 N ratio)")
    out = dict(phys)
    out.update(n_atoms=int(n), od=depth, gamma_1d_ratio=ratio)
    return out


def resolve_config(raw: dict, args) -> dict:
    """Defaults, then the file, then command-line overrides; validated."""
    base_dir = raw.pop("_base_dir", ".")
    cfg = _merge(DEFAULTS, raw)
    if getattr(args, "model", None):
        if args.command == "compare":
            cfg["compare"]["models"] = [m.strip() for m in args.model.split(",") if m.strip()]
        else:
            cfg["model"] = args.model
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "offset_ns", None) is not None:
        cfg["analysis"]["offset_ns"] = args.offset_ns
    if getattr(args, "background", None) is not None:
        cfg["analysis"]["background"] = args.background

    if cfg["model"] not in MODELS:
        raise ConfigError(f"unknown model {cfg['model']!r}; choose from {', '.join(MODELS)}")
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    phys = cfg["physics"]
    _num(phys, "gamma_prime_mhz", "physics", positive=True)
    _num(phys, "kd", "physics")
    if phys.get("placement") not in ("disordered", "lattice", "filling"):
        raise ConfigError("physics.placement must be disordered, lattice or filling")
    cfg["physics"] = _resolve_physics(phys)

    pulse = cfg["pulse"]
    if pulse.get("drive_csv"):
        path = Path(pulse["drive_csv"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            raise ConfigError(f"pulse.drive_csv not found: {path}")
        pulse["drive_csv"] = str(path)
    else:
        _num(pulse, "fwhm_ns", "pulse", positive=True)
    _num(pulse, "center_ns", "pulse")
    _num(pulse, "detuning_mhz", "pulse")

    grid = cfg["grid"]
    for key in ("t_start_ns", "t_end_ns", "span_factor"):
        _num(grid, key, "grid")
    if grid["t_end_ns"] <= grid["t_start_ns"]:
        raise ConfigError("grid.t_end_ns must exceed grid.t_start_ns")
    if not isinstance(grid["n_samples"], int) or grid["n_samples"] < 3:
        raise ConfigError("grid.n_samples must be an integer >= 3")
    try:
        GridPolicy(float(grid["span_factor"]), int(grid["n_points"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"grid: {exc}") from None

    an = cfg["analysis"]
    if not 0 <= float(an["background"]) < 1:
        raise ConfigError("background must lie in [0, 1)")
    if not 0 < float(an["fit_lower"]) < float(an["fit_upper"]) < 1:
        raise ConfigError("analysis: need 0 < fit_lower < fit_upper < 1")

    br = cfg["broadening"]
    if br.get("components_csv"):
        path = Path(br["components_csv"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            raise ConfigError(f"broadening.components_csv not found: {path}")
        br["components_csv"] = str(path)
    else:
        _num(br, "median_shift_mhz", "broadening", positive=True)
        _num(br, "shape", "broadening", positive=True)
        if br.get("direction") not in (1, -1):
            raise ConfigError("broadening.direction must be 1 or -1")
    sw = cfg["sweep"]
    for key in ("od", "fwhm_ns"):
        if not isinstance(sw.get(key), list):
            raise ConfigError(f"sweep.{key} must be a list")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# -- building model inputs -----------------------------------------------------

@dataclass
class Setup:
    units: UnitSystem
    params: PhysicalParams
    pulse: object
    center: float
    t_grid: np.ndarray
    components: list | None
    policy: GridPolicy
    placement: str


def _params(cfg: dict) -> PhysicalParams:
    phys = cfg["physics"]
    return PhysicalParams(n_atoms=phys["n_atoms"], gamma_prime=1.0,
                          gamma_1d=phys["gamma_1d_ratio"], kd=float(phys["kd"]))


def _components(cfg: dict, units: UnitSystem, depth: float):
    br = cfg["broadening"]
    if br.get("components_csv"):
        return read_components_csv(br["components_csv"], units.rate_from_mhz)
    weights = br.get("weights")
    spec = LogNormalSpec(n_components=int(br["n_components"]),
                         mu=math.log(float(units.rate_from_mhz(br["median_shift_mhz"]))),
                         s=float(br["shape"]), od_total=depth, seed=cfg["seed"],
                         direction=int(br["direction"]),
                         weights=None if weights is None else tuple(weights))
    return sample_components(spec)


def build_setup(cfg: dict, fwhm_ns: float | None = None) -> Setup:
    units = UnitSystem(float(cfg["physics"]["gamma_prime_mhz"]))
    params = _params(cfg)
    pc = cfg["pulse"]
    detuning = float(units.rate_from_mhz(pc["detuning_mhz"]))
    g = cfg["grid"]
    if pc.get("drive_csv"):
        drive = read_drive_csv(pc["drive_csv"], time_scale=units.gamma_prime_rad_per_ns)
        if detuning:
            carrier = np.exp(-1j * detuning * drive.t_grid)
            drive = SampledDrive(drive.t_grid, drive.amplitude * carrier)
        center = float(drive.t_grid[np.argmax(np.abs(drive.amplitude))])
        t_grid = drive.t_grid
    else:
        fwhm = float(pc["fwhm_ns"] if fwhm_ns is None else fwhm_ns)
        center = float(units.time_from_ns(pc["center_ns"]))
        drive = GaussianPulse(fwhm=float(units.time_from_ns(fwhm)), t0=center, detuning=detuning)
        t_grid = units.time_from_ns(np.linspace(g["t_start_ns"], g["t_end_ns"], g["n_samples"]))
    comps = _components(cfg, units, params.od) if cfg["model"] == "broadened" or \
        "broadened" in cfg["compare"]["models"] else None
    policy = GridPolicy(float(g["span_factor"]), int(g["n_points"]))
    return Setup(units, params, drive, center, t_grid, comps, policy, cfg["physics"]["placement"])


def _run(setup: Setup, model: str, seed: int, t_grid=None):
    if model in ("modes", "bessel") and not isinstance(setup.pulse, GaussianPulse):
        raise ConfigError(f"model {model!r} needs a Gaussian pulse, not a sampled drive")
    t = setup.t_grid if t_grid is None else t_grid
    if model == "bessel":
        t = t[t >= setup.pulse.t0]
    return run_model(model, setup.params, setup.pulse, t, placement=setup.placement,
                     rng=np.random.default_rng(seed), components=setup.components, policy=setup.policy)


# -- output helpers ------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(path: Path, trace, units: UnitSystem):
    t_ns = units.time_to_ns(trace.t_grid)
    field = trace.field
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ns", "intensity_norm", "field_re", "field_im"])
        for k in range(t_ns.size):
            if field is None:
                re = im = "nan"
            else:
                amp = field[k] / math.sqrt(trace.i0)
                re, im = _fmt(amp.real), _fmt(amp.imag)
            w.writerow([_fmt(t_ns[k]), _fmt(trace.intensity[k]), re, im])


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _envelope(cfg: dict, command: str) -> dict:
    return {"tool": "dynbeats", "version": __version__, "command": command,
            "config_hash": config_hash(cfg), "config": cfg}


def _features_summary(trace, setup: Setup, cfg: dict) -> dict:
    u = setup.units
    an = cfg["analysis"]
    floor = float(an["background"])
    try:
        feats = find_features(trace, setup.center, floor=floor)
    except ValueError as exc:
        return {"diagnostics": [f"feature extraction skipped: {exc}"], "n_valleys": None, "n_peaks": None}
    try:
        fit_decay(trace, feats, upper=float(an["fit_upper"]), lower=float(an["fit_lower"]))
    except ValueError as exc:
        feats.diagnostics.append(f"decay fit skipped: {exc}")
    d = feats.to_dict(time_scale=lambda t: u.time_to_ns(t), rate_scale=lambda r: r)
    d = {("valley_times_ns" if k == "valley_times" else "peak_times_ns" if k == "peak_times" else
          "tau_zero_ns" if k == "tau_zero" else "fit_window_ns" if k == "fit_window" else
          "gamma_eff_over_gamma_prime" if k == "gamma_eff" else
          "gamma_eff_stderr_over_gamma_prime" if k == "gamma_eff_stderr" else k): v
         for k, v in d.items()}
    if d["tau_zero_ns"] is not None:
        d["tau_zero_trigger_ns"] = d["tau_zero_ns"] + float(an["offset_ns"])
    d["one_plus_od_half"] = 1.0 + setup.params.od / 2.0
    d["n_valleys"], d["n_peaks"] = feats.n_valleys, feats.n_peaks
    return d


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path, jobs: int = 1) -> int:
    setup = build_setup(cfg)
    trace = _run(setup, cfg["model"], cfg["seed"])
    trace = apply_background(trace, float(cfg["analysis"]["background"]))
    prefix = cfg["output"]["prefix"]
    write_trace_csv(out / f"{prefix}_trace.csv", trace, setup.units)
    summary = _envelope(cfg, "simulate")
    summary["model"] = cfg["model"]
    summary["features"] = _features_summary(trace, setup, cfg)
    if trace.flags is not None:
        summary["unconverged_samples"] = int(np.count_nonzero(trace.flags))
    write_json(out / f"{prefix}_summary.json", summary)
    return EXIT_OK


def _mirror(params: PhysicalParams) -> bool:
    return abs(math.remainder(params.kd, math.pi)) < 1e-12


def cmd_compare(cfg: dict, out: Path, jobs: int = 1) -> int:
    models = cfg["compare"]["models"]
    if len(models) < 2:
        raise ConfigError("compare needs at least two models")
    for m in models:
        if m not in MODELS:
            raise ConfigError(f"unknown model {m!r}")
    setup = build_setup(cfg)
    t = setup.t_grid
    if "bessel" in models:
        t = t[t >= setup.pulse.t0]
    traces = {m: _run(setup, m, cfg["seed"], t) for m in models}
    report = _envelope(cfg, "compare")
    rows, failed = [], False
    for i, a in enumerate(models):
        for b in models[i + 1:]:
            ia, ib = traces[a].intensity, traces[b].intensity
            tol, floor = ORACLE_PAIRS.get(frozenset({a, b}), (None, 0.0))
            if frozenset({a, b}) == frozenset({"single-mode", "modes"}) and _mirror(setup.params):
                tol = MIRROR_TOL
            mask = (ib > floor) & (ia > floor) if floor > 0 else None
            err = relative_l2(ia, ib, mask)
            ok = None if tol is None else bool(err < tol)
            failed |= ok is False
            rows.append({"pair": [a, b], "relative_l2": err, "max_abs_deviation": max_deviation(ia, ib),
                         "tolerance": tol, "within_tolerance": ok})
    report["pairs"] = rows
    write_json(out / f"{cfg['output']['prefix']}_compare.json", report)
    with open(out / f"{cfg['output']['prefix']}_compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ns"] + [f"intensity_{m}" for m in models])
        t_ns = setup.units.time_to_ns(t)
        for k in range(t.size):
            w.writerow([_fmt(t_ns[k])] + [_fmt(traces[m].intensity[k]) for m in models])
    for r in rows:
        log.info("%s vs %s: relative L2 %.3e", *r["pair"], r["relative_l2"])
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_sweep(cfg: dict, out: Path, jobs: int = 1) -> int:
    sw = cfg["sweep"]
    if not sw["od"] or not sw["fwhm_ns"]:
        raise ConfigError("sweep.od and sweep.fwhm_ns must be non-empty")
    if any(not isinstance(v, (int, float)) or v < 0 for v in sw["od"]):
        raise ConfigError("sweep.od entries must be non-negative numbers")
    if any(not isinstance(v, (int, float)) or v <= 0 for v in sw["fwhm_ns"]):
        raise ConfigError("sweep.fwhm_ns entries must be positive numbers")
    model = cfg["model"]
    if model in ("broadened",):
        raise ConfigError("sweep supports every model except 'broadened'")
    units = UnitSystem(float(cfg["physics"]["gamma_prime_mhz"]))
    an = cfg["analysis"]
    rows = []
    for fwhm in sw["fwhm_ns"]:
        pulse = GaussianPulse(fwhm=float(units.time_from_ns(fwhm)),
                              t0=float(units.time_from_ns(cfg["pulse"]["center_ns"])),
                              detuning=float(units.rate_from_mhz(cfg["pulse"]["detuning_mhz"])))
        rows += [(fwhm, r) for r in sweep_od(
            sw["od"], pulse, model, n_atoms=cfg["physics"]["n_atoms"],
            t_end=float(units.time_from_ns(sw["t_end_ns"])), n_samples=int(sw["n_samples"]),
            fit_window=(float(an["fit_upper"]), float(an["fit_lower"])), seed=cfg["seed"], jobs=jobs,
            placement=cfg["physics"]["placement"], param_kw={"kd": float(cfg["physics"]["kd"])})]
    prefix = cfg["output"]["prefix"]
    offset = float(an["offset_ns"])
    with open(out / f"{prefix}_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["od", "fwhm_ns", "tau_zero_ns", "tau_zero_trigger_ns", "gamma_eff_over_gamma_prime",
                    "stderr", "one_plus_od_half", "n_valleys", "status", "message"])
        for fwhm, r in rows:
            tz = "" if r.tau_zero is None else _fmt(units.time_to_ns(r.tau_zero))
            tzt = "" if r.tau_zero is None else _fmt(units.time_to_ns(r.tau_zero) + offset)
            g = "" if r.gamma_eff is None else _fmt(r.gamma_eff)
            se = "" if r.gamma_eff_stderr is None else _fmt(r.gamma_eff_stderr)
            w.writerow([_fmt(r.od), _fmt(fwhm), tz, tzt, g, se, _fmt(1 + r.od / 2), r.n_valleys,
                        r.status, r.message])
    summary = _envelope(cfg, "sweep")
    summary["rows_ok"] = sum(r.status == "ok" for _, r in rows)
    summary["rows_total"] = len(rows)
    write_json(out / f"{prefix}_sweep.json", summary)
    return EXIT_OK if summary["rows_ok"] else EXIT_NUMERIC


def cmd_spectrum(cfg: dict, out: Path, jobs: int = 1) -> int:
    units = UnitSystem(float(cfg["physics"]["gamma_prime_mhz"]))
    params = _params(cfg)
    sp = cfg["spectrum"]
    delta_mhz = np.linspace(float(sp["delta_min_mhz"]), float(sp["delta_max_mhz"]), int(sp["n_points"]))
    omega = units.rate_from_mhz(delta_mhz)
    model = cfg["model"]
    extra = {}
    if model in ("continuum", "bessel"):
        t_coeff = continuum_function(params)(omega)
    elif model == "broadened":
        comps = _components(cfg, units, params.od)
        t_coeff = broadened_function(comps, params)(omega)
        write_components_csv(out / f"{cfg['output']['prefix']}_components.csv", comps, units.rate_to_mhz)
        if sp.get("per_component"):
            for k, c in enumerate(comps):
                extra[f"transmittance_{k}"] = np.abs(broadened_function([c], params)(omega)) ** 2
    elif model in ("modes", "spectral", "hl"):
        array = make_array(params, cfg["physics"]["placement"], np.random.default_rng(cfg["seed"]))
        t_coeff = transmission_function(diagonalize(array), params)(omega)
    elif model == "single-mode":
        # one bright mode at rate gamma' (1 + OD/2)
        mirror = PhysicalParams(params.n_atoms, params.gamma_prime, params.gamma_1d, kd=math.pi)
        t_coeff = transmission_function(diagonalize(lattice_array(mirror)), mirror)(omega)
    else:
        raise ConfigError(f"no spectrum for model {model!r}")
    with open(out / f"{cfg['output']['prefix']}_spectrum.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_mhz", "t_re", "t_im", "transmittance"] + list(extra))
        for k in range(omega.size):
            tc = t_coeff[k]
            w.writerow([_fmt(delta_mhz[k]), _fmt(tc.real), _fmt(tc.imag), _fmt(abs(tc) ** 2)]
                       + [_fmt(v[k]) for v in extra.values()])
    summary = _envelope(cfg, "spectrum")
    summary["min_transmittance"] = float(np.min(np.abs(t_coeff) ** 2))
    write_json(out / f"{cfg['output']['prefix']}_spectrum.json", summary)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep, "spectrum": cmd_spectrum}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynbeats", description="Pulse transmission through atoms on a waveguide.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--model", help="model name (comma-separated list for compare)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--offset-ns", type=float, default=None,
                       help="trigger offset added to reported first-zero times (default 1.1)")
        p.add_argument("--background", type=float, default=None,
                       help="constant background as a fraction of the no-atom peak (default 0)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = resolve_config(load_config(args.config), args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("numerical failure", exc_info=True)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
