"""One-mode model: a macroscopic polarization driven by the pulse.

The polarization obeys ``dp/dt + (gamma/2) p = i Omega(t)`` with
``gamma = gamma_prime (1 + OD/2)``, and the transmitted field is
``Omega(t) + i (N gamma_1d / 2) p(t)``.  That coupling constant makes the
continuous-wave limit reproduce ``T(omega_0) = 1 / (1 + OD/2)``, which is
also what the collective theory gives in the mirror configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    GaussianPulse,
    PhysicalParams,
    SampledDrive,
    TimeTrace,
    check_drive_resolution,
    drive_callable,
)
from .specfun import causal_gaussian_convolution

__all__ = [
    "SingleModeResult",
    "polarization_decay_rate",
    "evolve_polarization",
    "analytic_polarization",
    "output_field",
    "simulate",
]

RTOL = 1e-10
ATOL = 1e-14


@dataclass(frozen=True)
class SingleModeResult:
    trace: TimeTrace
    polarization: np.ndarray


def polarization_decay_rate(params: PhysicalParams) -> float:
    """``gamma_prime (1 + OD/2) = gamma_prime + N gamma_1d``."""
    return params.gamma_prime + params.n_atoms * params.gamma_1d


def evolve_polarization(drive, params: PhysicalParams, t_grid, *, detuning: float = 0.0,
                        p0: complex = 0.0, gamma: float | None = None,
                        rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Integrate the polarization equation with an adaptive 8th-order Runge-Kutta scheme.

    Parameters
    ----------
    drive : GaussianPulse or SampledDrive
        Drive envelope in the frame rotating at ``omega_0`` (or in the drive
        frame, combined with ``detuning``).
    params : PhysicalParams
    t_grid : array_like
        Output times; the integration starts at ``t_grid[0]``.
    p0 : complex
        Initial polarization.  Must be zero unless the drive is silent at
        the start of the grid.
    gamma : float, optional
        Override for the decay constant (defaults to ``gamma_prime (1+OD/2)``).

    Returns
    -------
    ndarray
        Complex polarization on ``t_grid``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least two samples")
    check_drive_resolution(drive)
    omega, width = drive_callable(drive, detuning)
    _check_quiet_start(drive, omega, t_grid[0])
    g = polarization_decay_rate(params) if gamma is None else gamma
    peak = _drive_peak(drive)
    if peak == 0:
        # silent drive: free decay only
        return p0 * np.exp(-0.5 * g * (t_grid - t_grid[0])).astype(complex)

    def rhs(t, p):
        return -0.5 * g * p + 1j * omega(t)

    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), np.array([p0], dtype=complex), method="DOP853",
                    t_eval=t_grid, rtol=rtol, atol=atol * max(peak, abs(p0) * g) / g,
                    max_step=width / 8.0)
    if not sol.success:
        raise RuntimeError(f"polarization integration failed: {sol.message}")
    return sol.y[0]


def _drive_peak(drive) -> float:
    if isinstance(drive, GaussianPulse):
        return abs(drive.peak_amplitude)
    return drive.peak


def _check_quiet_start(drive, omega, t_start: float, threshold: float = 1e-6):
    peak = _drive_peak(drive)
    if abs(omega(t_start)) > threshold * peak:
        raise ValueError("grid must start before the drive rises above 1e-6 of its peak")


def analytic_polarization(pulse: GaussianPulse, params: PhysicalParams, t, *,
                          gamma: float | None = None) -> np.ndarray:
    """Closed-form polarization for a Gaussian drive, starting from rest at ``t = -inf``."""
    g = polarization_decay_rate(params) if gamma is None else gamma
    s = np.asarray(t, dtype=float) - pulse.t0
    rate = 0.5 * g - 1j * pulse.detuning
    return 1j * pulse.peak_amplitude * np.exp(-1j * pulse.detuning * s) * causal_gaussian_convolution(
        s, pulse.sigma, rate)


def output_field(drive, p, params: PhysicalParams, t_grid=None) -> TimeTrace:
    """Transmitted field ``Omega + i (N gamma_1d / 2) p`` normalised to the peak input intensity."""
    p = np.asarray(p, dtype=complex)
    if isinstance(drive, SampledDrive):
        if t_grid is not None and not np.array_equal(np.asarray(t_grid, float), drive.t_grid):
            raise ValueError("polarization grid does not match the drive grid")
        if p.shape != drive.t_grid.shape:
            raise ValueError("polarization and drive sample counts differ")
        t_grid, omega_t, i0 = drive.t_grid, drive.amplitude, drive.peak**2
    elif isinstance(drive, GaussianPulse):
        if t_grid is None:
            raise ValueError("a t_grid is required with an analytic pulse")
        t_grid = np.asarray(t_grid, dtype=float)
        if p.shape != t_grid.shape:
            raise ValueError("polarization and grid sample counts differ")
        omega_t, i0 = drive(t_grid), abs(drive.peak_amplitude) ** 2
    else:
        raise TypeError(f"unsupported drive type {type(drive).__name__}")
    field = omega_t + 0.5j * params.n_atoms * params.gamma_1d * p
    return TimeTrace(t_grid, field, i0=i0, meta={"model": "single-mode"})


def simulate(drive, params: PhysicalParams, t_grid=None, *, method: str = "ode") -> SingleModeResult:
    """Run the one-mode model end to end.

    ``method`` is ``"ode"`` (Runge-Kutta) or ``"analytic"`` (Gaussian drives only).
    """
    if isinstance(drive, SampledDrive):
        t_grid = drive.t_grid if t_grid is None else np.asarray(t_grid, float)
    if t_grid is None:
        raise ValueError("t_grid is required for an analytic pulse")
    if method == "analytic":
        if not isinstance(drive, GaussianPulse):
            raise ValueError("the analytic solution needs a Gaussian pulse")
        p = analytic_polarization(drive, params, t_grid)
    elif method == "ode":
        p = evolve_polarization(drive, params, t_grid)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SingleModeResult(output_field(drive, p, params, t_grid), p)
