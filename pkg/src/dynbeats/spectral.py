"""Frequency-domain pulse propagation.

The transmitted field is synthesised as
``E(t) = (1/2pi) integral T(omega) E_in(omega) exp(-i omega t) d omega``
on a uniform frequency grid centred on the pulse carrier, and evaluated with
one FFT (native grid) or by direct summation at arbitrary times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GaussianPulse, SampledDrive, TimeTrace, TransmissionSpectrum, pulse_spectrum

__all__ = ["GridPolicy", "AliasingError", "FrequencyGrid", "frequency_grid", "transmit_pulse"]


class AliasingError(RuntimeError):
    """The periodic synthesis window is too short for the response."""


@dataclass(frozen=True)
class GridPolicy:
    """Discretisation of the synthesis integral.

    Attributes
    ----------
    span_factor : float
        Frequency span is ``span_factor * max(1/sigma, N gamma_1d, gamma_prime)``.
    n_points : int
        Minimum number of frequency samples (power of two); raised as needed
        so the periodic time window covers ``t_window`` plus decay guards.
    t_window : float or None
        Requested output window after the pulse start; ``None`` picks
        ``10 / gamma_prime`` past the pulse centre.
    guard_decays : float
        Number of slowest decay times appended to the window to suppress
        wrap-around.
    """

    span_factor: float = 40.0
    n_points: int = 2**13
    t_window: float | None = None
    guard_decays: float = 30.0

    def __post_init__(self):
        if self.span_factor < 20:
            raise ValueError("span_factor must be >= 20")
        if self.n_points < 2**12 or self.n_points & (self.n_points - 1):
            raise ValueError("n_points must be a power of two >= 4096")

    def doubled(self) -> "GridPolicy":
        return GridPolicy(self.span_factor, 2 * self.n_points, self.t_window, self.guard_decays)


@dataclass(frozen=True)
class FrequencyGrid:
    omega: np.ndarray
    t_start: float
    d_omega: float

    @property
    def n(self) -> int:
        return self.omega.size

    @property
    def dt(self) -> float:
        return 2.0 * math.pi / (self.n * self.d_omega)

    @property
    def t_grid(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n)


def _pulse_scales(pulse):
    if isinstance(pulse, GaussianPulse):
        return pulse.sigma, pulse.t0, pulse.detuning, pulse.t0 - 8.0 * pulse.sigma
    width = pulse.fwhm() / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return width, None, 0.0, pulse.t_grid[0]


def frequency_grid(pulse, policy: GridPolicy = GridPolicy(), *, gamma_prime: float = 1.0,
                   rate_scale: float = 0.0, linewidth: float | None = None) -> FrequencyGrid:
    """Uniform grid centred on the carrier, sized by the pulse, the atomic rates and ``policy``.

    ``rate_scale`` is the largest atomic rate (``N gamma_1d``), ``linewidth``
    the narrowest spectral feature (defaults to ``gamma_prime``).
    """
    sigma, t0, carrier, t_start = _pulse_scales(pulse)
    span = policy.span_factor * max(1.0 / sigma, rate_scale, gamma_prime)
    linewidth = gamma_prime if linewidth is None else linewidth
    if isinstance(pulse, GaussianPulse):
        t_window = policy.t_window if policy.t_window is not None else (t0 - t_start) + 10.0 / gamma_prime
    else:
        t_window = pulse.t_grid[-1] - t_start if policy.t_window is None else policy.t_window
    period = t_window + policy.guard_decays / linewidth
    n = policy.n_points
    while 2.0 * math.pi * n / span < period:
        n *= 2
    d_omega = span / n
    if 4.0 * d_omega > linewidth:
        raise ValueError(
            f"frequency step {d_omega:.3g} does not resolve linewidth {linewidth:.3g} with 4 samples")
    omega = carrier + d_omega * (np.arange(n) - n // 2)
    return FrequencyGrid(omega, t_start, d_omega)


def _input_spectrum(pulse, omega: np.ndarray) -> np.ndarray:
    if isinstance(pulse, GaussianPulse):
        return pulse_spectrum(pulse, omega)
    # zero-padded rectangle-rule transform of the sampled envelope
    dt = pulse.dt
    out = np.empty(omega.shape, dtype=complex)
    step = max(1, 4_000_000 // pulse.t_grid.size)
    for i in range(0, omega.size, step):
        w = omega[i:i + step]
        out[i:i + step] = np.exp(1j * np.outer(w, pulse.t_grid)) @ pulse.amplitude * dt
    return out


def transmit_pulse(transmission, pulse, policy: GridPolicy = GridPolicy(), *, gamma_prime: float = 1.0,
                   rate_scale: float = 0.0, linewidth: float | None = None, t_eval=None,
                   check_aliasing: bool = True) -> TimeTrace:
    """Filter ``pulse`` through a transmission coefficient.

    Parameters
    ----------
    transmission : callable or TransmissionSpectrum
        ``omega -> T(omega)``, or a spectrum already sampled on a uniform grid
        (its grid then defines the synthesis).
    pulse : GaussianPulse or SampledDrive
    t_eval : array_like, optional
        Evaluate by direct summation at these times instead of returning the
        native FFT grid.

    Returns
    -------
    TimeTrace
        Field and intensity normalised by the peak input intensity.

    Raises
    ------
    AliasingError
        If more than 1e-10 of the output energy sits within 10 samples of the
        periodic window edges.
    """
    if isinstance(transmission, TransmissionSpectrum):
        w = transmission.omega_grid
        d_omega = (w[-1] - w[0]) / (w.size - 1)
        if np.max(np.abs(np.diff(w) - d_omega)) > 1e-9 * abs(d_omega):
            raise ValueError("transmission spectrum must be sampled on a uniform grid")
        _, _, _, t_start = _pulse_scales(pulse)
        grid = FrequencyGrid(w, t_start, d_omega)
        t_vals = transmission.t_coeff
    else:
        grid = frequency_grid(pulse, policy, gamma_prime=gamma_prime, rate_scale=rate_scale,
                              linewidth=linewidth)
        t_vals = np.asarray(transmission(grid.omega), dtype=complex)
    e_in = _input_spectrum(pulse, grid.omega)
    weights = t_vals * e_in * grid.d_omega / (2.0 * math.pi)
    if isinstance(pulse, GaussianPulse):
        i0 = abs(pulse.peak_amplitude) ** 2
    else:
        i0 = pulse.peak ** 2

    n = grid.n
    t_native = grid.t_grid
    # E(t_j) = sum_k W_k exp(-i w_k t_j), w_k = w_0 + k dw, t_j = t_s + j dt, dw dt = 2pi/n
    ramp = np.exp(-1j * grid.d_omega * np.arange(n) * grid.t_start)
    native = np.exp(-1j * grid.omega[0] * t_native) * np.fft.fft(weights * ramp)
    if check_aliasing:
        energy = np.abs(native) ** 2
        edge = energy[:10].sum() + energy[-10:].sum()
        if edge > 1e-10 * energy.sum():
            raise AliasingError(
                f"{edge / energy.sum():.2e} of the output energy is at the window edge; "
                "increase n_points or guard_decays")
    if t_eval is None:
        return TimeTrace(t_native, native, i0=i0, meta={"model": "spectral"})
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size and (t_eval.min() < grid.t_start or t_eval.max() >= grid.t_start + n * grid.dt):
        raise ValueError("t_eval lies outside the periodic synthesis window")
    field = np.empty(t_eval.shape, dtype=complex)
    step = max(1, 4_000_000 // n)
    for i in range(0, t_eval.size, step):
        tt = t_eval[i:i + step]
        field[i:i + step] = np.exp(-1j * np.outer(tt, grid.omega)) @ weights
    return TimeTrace(t_eval, field, i0=i0, meta={"model": "spectral"})
