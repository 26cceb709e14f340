"""Beat features, decay fits and optical-depth sweeps.

Valleys and peaks are located on the log-intensity by refining discrete
extrema with a three-point parabola.  The effective decay rate is the
negative slope of a straight-line fit to the log-intensity along the fall of
the second peak.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import collective, continuum, singlemode
from .core import GaussianPulse, PhysicalParams, SampledDrive, TimeTrace
from .spectral import GridPolicy, transmit_pulse

__all__ = [
    "MODELS",
    "BeatFeatures",
    "DecayFit",
    "SweepRow",
    "find_features",
    "fit_decay",
    "apply_background",
    "run_model",
    "sweep_od",
    "relative_l2",
    "max_deviation",
]

log = logging.getLogger(__name__)

MODELS = ("single-mode", "modes", "hl", "spectral", "continuum", "bessel", "broadened")


@dataclass
class BeatFeatures:
    """Extrema of a transmitted-intensity trace.

    ``valley_times`` only lists minima after the input peak, which is
    ``peak_times[0]``.  ``tau_zero`` is the first valley measured from the
    pulse centre; it can be negative when the first zero falls on the rising
    edge of the pulse, which is reported in ``diagnostics``.
    """

    valley_times: np.ndarray
    peak_times: np.ndarray
    valley_values: np.ndarray
    peak_values: np.ndarray
    pulse_center: float
    tau_zero: float | None = None
    gamma_eff: float | None = None
    gamma_eff_stderr: float | None = None
    fit_window: tuple[float, float] | None = None
    diagnostics: list[str] = field(default_factory=list)

    @property
    def n_valleys(self) -> int:
        return int(self.valley_times.size)

    @property
    def n_peaks(self) -> int:
        return int(self.peak_times.size)

    def shifted(self, dt: float) -> "BeatFeatures":
        win = None if self.fit_window is None else (self.fit_window[0] + dt, self.fit_window[1] + dt)
        return replace(self, valley_times=self.valley_times + dt, peak_times=self.peak_times + dt,
                       pulse_center=self.pulse_center + dt, fit_window=win,
                       diagnostics=list(self.diagnostics))

    def to_dict(self, time_scale=lambda t: t, rate_scale=lambda r: r) -> dict:
        """JSON-ready summary; ``time_scale``/``rate_scale`` convert units."""
        def conv(f, v):
            return None if v is None else float(f(v))
        return {
            "valley_times": [float(time_scale(v)) for v in self.valley_times],
            "peak_times": [float(time_scale(v)) for v in self.peak_times],
            "valley_intensities": [float(v) for v in self.valley_values],
            "peak_intensities": [float(v) for v in self.peak_values],
            "tau_zero": conv(time_scale, self.tau_zero),
            "gamma_eff": conv(rate_scale, self.gamma_eff),
            "gamma_eff_stderr": conv(rate_scale, self.gamma_eff_stderr),
            "fit_window": None if self.fit_window is None else [float(time_scale(v)) for v in self.fit_window],
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    stderr: float
    window: tuple[float, float]
    n_samples: int


def _parabolic(t: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through samples ``i-1, i, i+1``."""
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return t[i], y1
    shift = 0.5 * (y0 - y2) / denom
    shift = min(max(shift, -1.0), 1.0)
    dt = t[i + 1] - t[i]
    return t[i] + shift * dt, y1 - 0.25 * (y0 - y2) * shift


def _raw_extrema(logi: np.ndarray) -> list[tuple[int, int]]:
    """Indices of discrete extrema as ``(index, +1 peak / -1 valley)``; flat runs count once."""
    d = np.sign(np.diff(logi))
    # carry the last non-zero slope across plateaus
    nz = np.flatnonzero(d)
    if nz.size == 0:
        return []
    d = d[nz[np.maximum(np.searchsorted(nz, np.arange(d.size), side="right") - 1, 0)]]
    out = []
    for k in np.flatnonzero(d[1:] != d[:-1]):
        i = k + 1
        out.append((i, 1 if d[k] > 0 else -1))
    return out


def find_features(trace: TimeTrace, pulse_center: float, *, floor: float = 0.0,
                  gamma_prime: float = 1.0, min_prominence: float = 1e-3,
                  t_end: float | None = None) -> BeatFeatures:
    """Locate valleys and peaks of the transmitted intensity.

    Parameters
    ----------
    trace : TimeTrace
        Uniformly sampled; at least 100 samples per ``1/gamma_prime``.
    pulse_center : float
        Input-pulse centre, the reference for ``tau_zero``.
    floor : float
        Background level; extrema at or below it are discarded.
    min_prominence : float
        Extrema whose log-intensity differs from both neighbouring extrema
        by less than this are treated as numerical ripple and merged.
    t_end : float, optional
        Ignore samples after this time.

    Returns
    -------
    BeatFeatures
        Empty (with a diagnostic) when the trace has no valley.
    """
    t = trace.t_grid
    inten = trace.intensity
    if t_end is not None:
        keep = t <= t_end
        t, inten = t[keep], inten[keep]
    if t.size < 3:
        raise ValueError("trace too short for feature extraction")
    dt = t[1] - t[0]
    if dt * gamma_prime > 1e-2:
        raise ValueError(f"trace too coarse: {1.0 / (dt * gamma_prime):.0f} samples per 1/gamma_prime, need 100")
    with np.errstate(divide="ignore"):
        logi = np.log(np.maximum(inten, np.finfo(float).tiny))

    ext = [(i, kind) for i, kind in _raw_extrema(logi) if 0 < i < t.size - 1]
    ext = _merge_ripple(ext, logi, min_prominence)
    diagnostics = []
    refined = []
    for i, kind in ext:
        if inten[i] <= floor:
            continue
        tv, lv = _parabolic(t, logi, i)
        refined.append((tv, math.exp(lv), kind))

    peaks = [(tv, v) for tv, v, k in refined if k > 0]
    if not peaks:
        diagnostics.append("no peak found")
        return _empty(pulse_center, diagnostics)
    # traces start quiet, so the first maximum is the transmitted input; at
    # high OD the flash after the first zero can outshine it
    t_in = peaks[0][0]
    valleys = [(tv, v) for tv, v, k in refined if k < 0 and tv > t_in]
    peaks = [(tv, v) for tv, v in peaks if tv >= t_in]
    if not valleys:
        diagnostics.append("no valley after the input peak")
        feats = _empty(pulse_center, diagnostics)
        feats.peak_times = np.array([p[0] for p in peaks])
        feats.peak_values = np.array([p[1] for p in peaks])
        return feats
    tau = valleys[0][0] - pulse_center
    if tau <= 0:
        diagnostics.append("first valley precedes the pulse centre")
    return BeatFeatures(
        valley_times=np.array([v[0] for v in valleys]),
        peak_times=np.array([p[0] for p in peaks]),
        valley_values=np.array([v[1] for v in valleys]),
        peak_values=np.array([p[1] for p in peaks]),
        pulse_center=pulse_center,
        tau_zero=tau,
        diagnostics=diagnostics,
    )


def _empty(pulse_center: float, diagnostics) -> BeatFeatures:
    e = np.empty(0)
    return BeatFeatures(e, e, e, e, pulse_center, diagnostics=list(diagnostics))


def _merge_ripple(ext, logi, min_prominence):
    """Drop adjacent peak/valley pairs whose depth is below ``min_prominence``."""
    ext = list(ext)
    changed = True
    while changed and len(ext) > 1:
        changed = False
        for k in range(len(ext) - 1):
            (i, a), (j, b) = ext[k], ext[k + 1]
            if a != b and abs(logi[i] - logi[j]) < min_prominence:
                del ext[k:k + 2]
                changed = True
                break
    return ext


def fit_decay(trace: TimeTrace, features: BeatFeatures, *, upper: float = 0.8,
              lower: float = 0.2) -> DecayFit:
    """Effective decay rate on the fall of the second peak.

    Least-squares line through ``log I`` over the contiguous stretch after the
    second peak where ``lower <= I / I_peak <= upper``; the rate is minus the
    slope, reported with its standard error.  ``features`` is updated in place.
    """
    if not 0 < lower < upper < 1:
        raise ValueError("need 0 < lower < upper < 1")
    if features.n_valleys == 0 or features.n_peaks < 2:
        raise ValueError("fit_decay needs a second peak")
    t, inten = trace.t_grid, trace.intensity
    t_peak = features.peak_times[1]
    later = features.valley_times[features.valley_times > t_peak]
    t_stop = later[0] if later.size else t[-1]
    i_peak = int(np.argmin(np.abs(t - t_peak)))
    seg = np.flatnonzero((t >= t[i_peak]) & (t <= t_stop))
    i_peak = seg[np.argmax(inten[seg])]
    top = inten[i_peak]
    rel = inten / top
    start = i_peak
    while start < seg[-1] and rel[start] > upper:
        start += 1
    stop = start
    while stop <= seg[-1] and rel[stop] >= lower:
        stop += 1
    idx = np.arange(start, stop)
    if idx.size < 5:
        raise ValueError(f"decay-fit window holds {idx.size} samples, need at least 5")
    res = stats.linregress(t[idx], np.log(inten[idx]))
    fit = DecayFit(-res.slope, res.stderr, (float(t[idx[0]]), float(t[idx[-1]])), int(idx.size))
    features.gamma_eff = fit.gamma
    features.gamma_eff_stderr = fit.stderr
    features.fit_window = fit.window
    return fit


def apply_background(trace: TimeTrace, floor: float) -> TimeTrace:
    """Add a constant background ``floor`` (fraction of the no-atom peak) to the intensity."""
    if not 0 <= floor < 1:
        raise ValueError("floor must lie in [0, 1)")
    if floor == 0:
        return trace
    out = trace.with_intensity(trace.intensity + floor)
    out.meta["background"] = floor
    return out


def relative_l2(a, b, weight=None) -> float:
    """``||a - b|| / ||b||`` over the samples selected by the boolean ``weight``."""
    a, b = np.asarray(a), np.asarray(b)
    if weight is not None:
        a, b = a[weight], b[weight]
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def max_deviation(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# -- model dispatch ------------------------------------------------------------

def _array_for(params, placement, rng):
    return collective.make_array(params, placement, rng)


def _spectral_policy(policy: GridPolicy, pulse, t_grid) -> GridPolicy:
    start = pulse.t0 - 8.0 * pulse.sigma if isinstance(pulse, GaussianPulse) else pulse.t_grid[0]
    return replace(policy, t_window=max(float(np.max(t_grid)) - start, policy.t_window or 0.0))


def _quiet_start_grid(pulse, t_grid):
    """Prepend an earlier start if the Gaussian drive is not yet quiet at ``t_grid[0]``."""
    if isinstance(pulse, GaussianPulse):
        start = pulse.support_start(1e-8)
        if start < t_grid[0]:
            return np.concatenate(([start], t_grid)), 1
    return t_grid, 0


def run_model(model: str, params: PhysicalParams, pulse, t_grid, *, placement: str = "disordered",
              rng=None, components=None, policy: GridPolicy = GridPolicy()) -> TimeTrace:
    """Transmitted trace for one model layer.

    ``model`` is one of :data:`MODELS`.  ``spectral`` filters the pulse
    through the N-atom coefficient, ``continuum`` through the continuous
    medium and ``broadened`` through the product of shifted media given by
    ``components``; all three use the frequency-domain pipeline.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    gp = params.gamma_prime
    rate = params.n_atoms * params.gamma_1d
    if model == "single-mode":
        if isinstance(pulse, GaussianPulse):
            return singlemode.simulate(pulse, params, t_grid, method="analytic").trace
        return singlemode.simulate(pulse, params).trace
    if model in ("modes", "hl", "spectral"):
        array = _array_for(params, placement, rng)
        if model == "hl":
            t_run, skip = _quiet_start_grid(pulse, t_grid)
            tr = collective.hl_evolve(pulse, array, t_grid=t_run)
            return TimeTrace(t_grid, tr.field[skip:], i0=tr.i0, meta=tr.meta) if skip else tr
        modes = collective.diagonalize(array)
        if model == "modes":
            if not isinstance(pulse, GaussianPulse):
                raise ValueError("the closed-form mode sum needs a Gaussian pulse; use 'hl' or 'spectral'")
            return collective.intensity_closed_form(pulse, modes, params, t_grid)
        bright = np.abs(modes.etas) > 1e-12 * params.n_atoms
        width = gp + (modes.decay_rates[bright].min() if np.any(bright) else 0.0)
        tr = transmit_pulse(collective.transmission_function(modes, params), pulse,
                            _spectral_policy(policy, pulse, t_grid), gamma_prime=gp, rate_scale=rate,
                            linewidth=width, t_eval=t_grid)
        tr.meta["model"] = model
        return tr
    if model == "continuum":
        tr = transmit_pulse(continuum.continuum_function(params), pulse, _spectral_policy(policy, pulse, t_grid),
                            gamma_prime=gp, rate_scale=rate, t_eval=t_grid)
        tr.meta["model"] = model
        return tr
    if model == "broadened":
        if not components:
            raise ValueError("the broadened model needs broadening components")
        tr = transmit_pulse(continuum.broadened_function(components, params), pulse,
                            _spectral_policy(policy, pulse, t_grid), gamma_prime=gp, rate_scale=rate,
                            t_eval=t_grid)
        tr.meta["model"] = model
        return tr
    if model == "bessel":
        if not isinstance(pulse, GaussianPulse):
            raise ValueError("the Bessel series needs a Gaussian pulse")
        return continuum.intensity_bessel(t_grid, params, pulse)
    raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")


# -- optical-depth sweeps ------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    od: float
    fwhm: float
    tau_zero: float | None
    gamma_eff: float | None
    gamma_eff_stderr: float | None
    n_valleys: int
    status: str
    message: str = ""


def _sweep_row(args) -> SweepRow:
    (od_value, pulse, model, n_atoms, gamma_prime, kw, t_end, n_samples, window, seed) = args
    try:
        params = PhysicalParams.from_od(od_value, n_atoms, gamma_prime, **kw.pop("param_kw", {}))
        start = pulse.t0 - 4.0 * pulse.sigma
        t_grid = np.linspace(start, pulse.t0 + t_end, n_samples)
        trace = run_model(model, params, pulse, t_grid, rng=np.random.default_rng(seed), **kw)
        feats = find_features(trace, pulse.t0, gamma_prime=gamma_prime)
        if feats.n_valleys == 0:
            return SweepRow(od_value, pulse.fwhm, None, None, None, 0, "no-valley", "; ".join(feats.diagnostics))
        msg = "; ".join(feats.diagnostics)
        try:
            fit = fit_decay(trace, feats, upper=window[0], lower=window[1])
            g, se = fit.gamma, fit.stderr
        except ValueError as exc:
            g = se = None
            msg = "; ".join(filter(None, [msg, str(exc)]))
        return SweepRow(od_value, pulse.fwhm, feats.tau_zero, g, se, feats.n_valleys, "ok", msg)
    except Exception as exc:  # a failed row must not stop the sweep
        log.warning("sweep row OD=%g failed: %s", od_value, exc)
        return SweepRow(od_value, pulse.fwhm, None, None, None, 0, "error", f"{type(exc).__name__}: {exc}")


def sweep_od(od_values, pulse: GaussianPulse, model: str = "single-mode", *, n_atoms: int = 40,
             gamma_prime: float = 1.0, t_end: float = 10.0, n_samples: int = 8001,
             fit_window: tuple[float, float] = (0.8, 0.2), seed: int = 0, jobs: int = 1,
             **model_kw) -> list[SweepRow]:
    """First-zero delay and effective decay rate across optical depths.

    Each row runs ``model`` at one OD, keeping ``n_atoms`` fixed, on a grid
    from ``t0 - 4 sigma`` to ``t0 + t_end``.  Rows use independent random
    streams spawned from ``seed``; failures are recorded per row.
    """
    od_values = [float(v) for v in od_values]
    if not od_values:
        raise ValueError("od_values is empty")
    if any(v < 0 for v in od_values):
        raise ValueError("optical depths must be non-negative")
    seeds = np.random.SeedSequence(seed).spawn(len(od_values))
    tasks = [(v, pulse, model, n_atoms, gamma_prime, dict(model_kw), t_end, n_samples, fit_window, s)
             for v, s in zip(od_values, seeds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_row, tasks))
    return [_sweep_row(task) for task in tasks]
