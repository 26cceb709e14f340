"""Physical parameters, pulses and the shared trace/spectrum containers.

Conventions
-----------
* Fields are complex envelopes in the frame rotating at the atomic
  resonance ``omega_0``; a pulse carrier enters only through its detuning.
* Time-to-frequency synthesis uses the ``exp(-i omega t)`` kernel,
  ``E(t) = (1/2pi) integral E(omega) exp(-i omega t) d omega``.
* Library routines work in any consistent unit system.  The CLI uses natural
  units (``gamma_prime = 1``, times in ``1/gamma_prime``) and converts to
  ns / MHz only at its boundary, see :class:`UnitSystem`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "FWHM_TO_SIGMA",
    "PhysicalParams",
    "GaussianPulse",
    "SampledDrive",
    "TimeTrace",
    "TransmissionSpectrum",
    "UnitSystem",
    "od",
    "gaussian_envelope",
    "pulse_spectrum",
    "read_drive_csv",
]

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class PhysicalParams:
    """Atom number and rates of a waveguide-coupled ensemble.

    Attributes
    ----------
    n_atoms : int
        Number of atoms ``N``.
    gamma_prime : float
        Decay rate into non-guided modes.
    gamma_1d : float
        Emission rate into the guided mode.
    kd : float
        Lattice phase per nearest-neighbour spacing (radians).
    omega_0 : float
        Atomic resonance; held at 0 in the rotating frame.
    """

    n_atoms: int
    gamma_prime: float = 1.0
    gamma_1d: float = 0.0
    kd: float = 0.5 * math.pi
    omega_0: float = 0.0

    def __post_init__(self):
        if self.n_atoms < 0 or int(self.n_atoms) != self.n_atoms:
            raise ValueError(f"n_atoms must be a non-negative integer, got {self.n_atoms}")
        if not self.gamma_prime > 0:
            raise ValueError("gamma_prime must be positive")
        if self.gamma_1d < 0:
            raise ValueError("gamma_1d must be non-negative")

    @property
    def od(self) -> float:
        return od(self)

    @property
    def collective_rate(self) -> float:
        """``N * gamma_1d``, the rate that fixes the continuum limit."""
        return self.n_atoms * self.gamma_1d

    @classmethod
    def from_od(cls, optical_depth: float, n_atoms: int, gamma_prime: float = 1.0, **kw):
        """Parameters with ``gamma_1d`` chosen to realise ``optical_depth``."""
        if n_atoms == 0:
            if optical_depth != 0:
                raise ValueError("a nonzero OD needs at least one atom")
            return cls(0, gamma_prime, 0.0, **kw)
        return cls(n_atoms, gamma_prime, optical_depth * gamma_prime / (2.0 * n_atoms), **kw)


def od(params: PhysicalParams) -> float:
    """Optical depth ``2 N gamma_1d / gamma_prime``."""
    return 2.0 * params.n_atoms * params.gamma_1d / params.gamma_prime


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian input pulse ``peak * exp(-(t-t0)^2/(2 sigma^2)) * exp(-i detuning (t-t0))``."""

    fwhm: float
    t0: float = 0.0
    detuning: float = 0.0
    peak_amplitude: complex = 1.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("fwhm must be positive")

    @property
    def sigma(self) -> float:
        return self.fwhm * FWHM_TO_SIGMA

    @classmethod
    def from_sigma(cls, sigma: float, **kw) -> "GaussianPulse":
        return cls(fwhm=sigma / FWHM_TO_SIGMA, **kw)

    def __call__(self, t):
        return gaussian_envelope(self, t)

    def sampled(self, t_grid) -> "SampledDrive":
        t_grid = np.asarray(t_grid, dtype=float)
        return SampledDrive(t_grid, gaussian_envelope(self, t_grid))

    def support_start(self, threshold: float = 1e-6) -> float:
        """Earliest time at which ``|envelope| / peak`` reaches ``threshold``."""
        return self.t0 - self.sigma * math.sqrt(-2.0 * math.log(threshold))


def gaussian_envelope(pulse: GaussianPulse, t):
    """Complex envelope of ``pulse`` at time(s) ``t``."""
    s = np.asarray(t, dtype=float) - pulse.t0
    return pulse.peak_amplitude * np.exp(-(s**2) / (2.0 * pulse.sigma**2) - 1j * pulse.detuning * s)


def pulse_spectrum(pulse: GaussianPulse, omega):
    """Analytic transform ``integral E(t) exp(+i omega t) dt`` of the Gaussian envelope."""
    omega = np.asarray(omega, dtype=float)
    sig = pulse.sigma
    return (
        pulse.peak_amplitude
        * math.sqrt(2.0 * math.pi)
        * sig
        * np.exp(1j * omega * pulse.t0 - 0.5 * sig**2 * (omega - pulse.detuning) ** 2)
    )


def _check_uniform(t: np.ndarray, what: str) -> float:
    if t.ndim != 1 or t.size < 2:
        raise ValueError(f"{what} must be a 1-D grid with at least two samples")
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise ValueError(f"{what} must be uniform and increasing")
    return dt


@dataclass(frozen=True)
class SampledDrive:
    """Drive envelope ``Omega(t)`` on a uniform time grid."""

    t_grid: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        a = np.asarray(self.amplitude, dtype=complex)
        if t.shape != a.shape:
            raise ValueError("t_grid and amplitude must have the same shape")
        _check_uniform(t, "drive t_grid")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "amplitude", a)

    @property
    def dt(self) -> float:
        return (self.t_grid[-1] - self.t_grid[0]) / (self.t_grid.size - 1)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.amplitude)))

    def starts_quiet(self, threshold: float = 1e-6) -> bool:
        return abs(self.amplitude[0]) <= threshold * self.peak

    def fwhm(self) -> float:
        """Full width at half maximum of ``|Omega|``, from the outermost half-height crossings."""
        mag = np.abs(self.amplitude)
        half = 0.5 * mag.max()
        above = np.nonzero(mag >= half)[0]
        i0, i1 = above[0], above[-1]

        def cross(i, j):
            # linear interpolation between samples i (below) and j (above)
            if i < 0 or i >= mag.size:
                return self.t_grid[j]
            return self.t_grid[i] + (half - mag[i]) / (mag[j] - mag[i]) * (self.t_grid[j] - self.t_grid[i])

        return float(cross(i1 + 1, i1) - cross(i0 - 1, i0))


def read_drive_csv(path, time_scale: float = 1.0) -> SampledDrive:
    """Read a drive from a CSV with columns ``t_ns, re[, im]``.

    A non-numeric first row is treated as a header.  ``time_scale`` converts
    the file's time column into the caller's units.
    """
    rows = []
    with open(Path(path), newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if k == 0:
                    continue
                raise ValueError(f"{path}: non-numeric data on line {k + 1}") from None
            if len(vals) not in (2, 3):
                raise ValueError(f"{path}: expected 2 or 3 columns, got {len(vals)} on line {k + 1}")
            rows.append(vals if len(vals) == 3 else vals + [0.0])
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two samples")
    data = np.asarray(rows)
    return SampledDrive(data[:, 0] * time_scale, data[:, 1] + 1j * data[:, 2])


@dataclass(frozen=True)
class TimeTrace:
    """Output field on a uniform time grid.

    ``intensity`` is ``|field|**2 / i0`` with ``i0`` the peak input intensity.
    Either of ``field`` or ``intensity`` may be given; a missing one is filled
    from the other where possible.
    """

    t_grid: np.ndarray
    field: np.ndarray | None = None
    intensity: np.ndarray | None = None
    i0: float = 1.0
    flags: np.ndarray | None = None
    meta: dict = dc_field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        object.__setattr__(self, "t_grid", t)
        if self.field is None and self.intensity is None:
            raise ValueError("TimeTrace needs a field or an intensity")
        if self.field is not None:
            f = np.asarray(self.field, dtype=complex)
            if f.shape != t.shape:
                raise ValueError("field and t_grid shapes differ")
            object.__setattr__(self, "field", f)
            if self.intensity is None:
                object.__setattr__(self, "intensity", np.abs(f) ** 2 / self.i0)
        inten = np.asarray(self.intensity, dtype=float)
        if inten.shape != t.shape:
            raise ValueError("intensity and t_grid shapes differ")
        object.__setattr__(self, "intensity", inten)

    def with_intensity(self, intensity) -> "TimeTrace":
        """Copy carrying a modified intensity; the field is dropped."""
        return TimeTrace(self.t_grid, None, np.asarray(intensity, float), self.i0, self.flags, dict(self.meta))

    def shifted(self, dt: float) -> "TimeTrace":
        return TimeTrace(self.t_grid + dt, self.field, self.intensity, self.i0, self.flags, dict(self.meta))


@dataclass(frozen=True)
class TransmissionSpectrum:
    """Complex field transmission ``t_coeff`` sampled on ``omega_grid`` (relative to ``omega_0``)."""

    omega_grid: np.ndarray
    t_coeff: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega_grid, dtype=float)
        tc = np.asarray(self.t_coeff, dtype=complex)
        if w.shape != tc.shape:
            raise ValueError("omega_grid and t_coeff shapes differ")
        object.__setattr__(self, "omega_grid", w)
        object.__setattr__(self, "t_coeff", tc)

    @property
    def transmittance(self) -> np.ndarray:
        return np.abs(self.t_coeff) ** 2

    def is_passive(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(self.t_coeff) <= 1.0 + tol))


@dataclass(frozen=True)
class UnitSystem:
    """Conversion between lab units (ns, MHz) and natural units ``gamma_prime = 1``.

    ``gamma_prime_mhz`` is ``gamma_prime / 2pi`` in MHz, so 5.2 means
    ``gamma_prime = 2pi * 5.2 MHz``.
    """

    gamma_prime_mhz: float = 5.2

    @property
    def gamma_prime_rad_per_ns(self) -> float:
        return 2.0 * math.pi * self.gamma_prime_mhz * 1e-3

    def time_from_ns(self, t_ns):
        return np.asarray(t_ns, dtype=float) * self.gamma_prime_rad_per_ns

    def time_to_ns(self, t):
        return np.asarray(t, dtype=float) / self.gamma_prime_rad_per_ns

    def rate_from_mhz(self, f_mhz):
        """Angular frequency ``2pi * f_mhz`` expressed in units of ``gamma_prime``."""
        return np.asarray(f_mhz, dtype=float) / self.gamma_prime_mhz

    def rate_to_mhz(self, rate):
        return np.asarray(rate, dtype=float) * self.gamma_prime_mhz


def drive_callable(drive, detuning: float = 0.0):
    """Return ``(omega_of_t, width)`` for a Gaussian pulse or a sampled drive.

    Sampled drives are interpolated with a complex cubic spline.  A nonzero
    ``detuning`` multiplies the envelope by ``exp(-i detuning t)``, moving a
    drive-frame envelope into the frame rotating at ``omega_0``.  ``width`` is
    the drive FWHM, used to bound integrator steps.
    """
    if isinstance(drive, GaussianPulse):
        base, width = drive, drive.fwhm
    elif isinstance(drive, SampledDrive):
        spline = CubicSpline(drive.t_grid, drive.amplitude)
        t_lo, t_hi = drive.t_grid[0], drive.t_grid[-1]

        def base(t):
            t = np.asarray(t, dtype=float)
            inside = (t >= t_lo) & (t <= t_hi)
            return np.where(inside, spline(np.clip(t, t_lo, t_hi)), 0.0)

        width = drive.fwhm()
    else:
        raise TypeError(f"unsupported drive type {type(drive).__name__}")
    if detuning == 0.0:
        return base, width
    return (lambda t: base(t) * np.exp(-1j * detuning * np.asarray(t, dtype=float))), width


def check_drive_resolution(drive, min_samples: float = 20.0, timescale: float | None = None):
    """Reject sampled drives coarser than ``min_samples`` per FWHM (or per ``timescale``)."""
    if not isinstance(drive, SampledDrive):
        return
    scale = drive.fwhm() if timescale is None else min(drive.fwhm(), timescale)
    if scale / drive.dt < min_samples:
        raise ValueError(
            f"drive grid too coarse: {scale / drive.dt:.1f} samples per {scale:.4g} "
            f"(need >= {min_samples:g}); refine the drive sampling"
        )
