"""Continuous-medium limit and inhomogeneous broadening.

For many atoms at fixed ``N gamma_1d`` the transmission becomes
``T(omega) = exp(-i (N gamma_1d / 2) / (omega - omega_0 + i gamma_prime / 2))``.
For a Gaussian input the transmitted field then has a Bessel-series
representation in time.  Its positive-order terms grow like
``(t/sigma)^m / sqrt(m!)`` before cancelling, so the sum is carried out in
extended precision with the working precision and truncation order chosen
per sample.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import mpmath
import numpy as np
from scipy import integrate, special

from .core import GaussianPulse, PhysicalParams, TimeTrace, TransmissionSpectrum, od
from .specfun import faddeeva, gaussian_moment

__all__ = [
    "BroadeningComponent",
    "LogNormalSpec",
    "QuadratureError",
    "transmission_continuum",
    "continuum_function",
    "coefficients_a",
    "coefficients_a_derivative",
    "intensity_bessel",
    "sample_components",
    "broadened_transmission",
    "broadened_function",
    "write_components_csv",
    "read_components_csv",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature for a Bessel-series coefficient did not converge."""


def continuum_function(params: PhysicalParams, *, optical_depth: float | None = None, shift: float = 0.0):
    """Callable ``omega -> T(omega)`` of a continuous medium, optionally with its line shifted."""
    depth = od(params) if optical_depth is None else optical_depth
    strength = 0.25 * depth * params.gamma_prime  # N gamma_1d / 2
    centre = params.omega_0 + shift
    half = 0.5 * params.gamma_prime

    def t_of_omega(omega):
        w = np.asarray(omega, dtype=float)
        return np.exp(-1j * strength / (w - centre + 1j * half))

    return t_of_omega


def transmission_continuum(omega_grid, params: PhysicalParams) -> TransmissionSpectrum:
    omega_grid = np.asarray(omega_grid, dtype=float)
    return TransmissionSpectrum(omega_grid, continuum_function(params)(omega_grid))


# -- Bessel-series coefficients ------------------------------------------------

def _offset(pulse: GaussianPulse, params: PhysicalParams) -> complex:
    return complex(pulse.detuning - params.omega_0 + 0.5j * params.gamma_prime)


def _negative_moment_quad(n: int, alpha: complex, sigma: float) -> complex:
    """``integral (z+alpha)^-n exp(-sigma^2 z^2/2) dz`` by adaptive quadrature on the real axis."""
    centre = -alpha.real
    reach = 14.0 / sigma + abs(centre)

    def weight(z):
        return abs(z + alpha) ** (-n) * math.exp(-0.5 * sigma**2 * z * z)

    def integrand(z, part):
        v = (z + alpha) ** (-n) * math.exp(-0.5 * sigma**2 * z * z)
        return v.real if part == 0 else v.imag

    total = 0j
    # split at the pole's real part so the peaked region is resolved
    for lo, hi in ((-reach, centre), (centre, reach)):
        scale = integrate.quad(weight, lo, hi, epsabs=0.0, epsrel=1e-8, limit=1000)[0]
        parts = []
        for part in (0, 1):
            val, err, *_ = integrate.quad(integrand, lo, hi, args=(part,), epsabs=1e-15 * scale,
                                          epsrel=1e-13, limit=2000, full_output=1)
            if err > 1e-12 * scale:
                raise QuadratureError(f"A_{-n}: quadrature residual {err:.2e} (scale {scale:.2e})")
            parts.append(val)
        total += parts[0] + 1j * parts[1]
    return total


def coefficients_a(m_range, pulse: GaussianPulse, params: PhysicalParams) -> np.ndarray:
    """Bessel-series coefficients ``A_m`` for each order in ``m_range``.

    ``A_m = ((-2i)^m / 2pi) integral (z + alpha)^m exp(-sigma^2 z^2/2) dz`` with
    ``alpha = Delta + i gamma_prime / 2``.  Non-negative orders use the
    closed-form Gaussian moment; negative orders use adaptive quadrature.
    """
    alpha = _offset(pulse, params)
    sig = pulse.sigma
    out = []
    for m in m_range:
        m = int(m)
        if m >= 0:
            out.append((-2j) ** m * gaussian_moment(m, alpha, sig))
        else:
            out.append((-2j) ** m * _negative_moment_quad(-m, alpha, sig) / (2.0 * math.pi))
    return np.array(out, dtype=complex)


def _faddeeva_derivatives(zeta: complex, order: int) -> list[complex]:
    """``w^(k)(zeta)`` for ``k = 0..order`` from ``w' = -2 zeta w + 2i/sqrt(pi)``."""
    ders = [complex(faddeeva(zeta))]
    if order >= 1:
        ders.append(-2.0 * zeta * ders[0] + 2j / math.sqrt(math.pi))
    for k in range(1, order):
        ders.append(-2.0 * zeta * ders[k] - 2.0 * k * ders[k - 1])
    return ders


def coefficients_a_derivative(m: int, pulse: GaussianPulse, params: PhysicalParams) -> complex:
    """Negative-order ``A_m`` from derivatives of ``F(alpha) = integral exp(-sigma^2 z^2/2)/(z+alpha) dz``.

    ``F = -i pi w(alpha sigma / sqrt 2)``.  Kept as an independent check on
    the quadrature; repeated differentiation loses accuracy at high order.
    """
    if m >= 0:
        raise ValueError("derivative form applies to m < 0")
    n = -m
    alpha = _offset(pulse, params)
    sig = pulse.sigma
    k = n - 1
    wk = _faddeeva_derivatives(alpha * sig / math.sqrt(2.0), k)[k]
    dF = -1j * math.pi * (sig / math.sqrt(2.0)) ** k * wk
    moment = (-1) ** k / math.factorial(k) * dF
    return (-2j) ** m * moment / (2.0 * math.pi)


# -- Bessel series in time -----------------------------------------------------

def _log_bessel_bound(m: np.ndarray, x: float) -> np.ndarray:
    """``log`` of ``min(1, (x/2)^m / m!)``, an upper bound on ``|J_m(x)|`` for ``m >= 0``."""
    with np.errstate(divide="ignore"):
        b = m * math.log(x / 2.0) - special.gammaln(m + 1.0) if x > 0 else np.where(m == 0, 0.0, -np.inf)
    return np.minimum(b, 0.0)


def _positive_moments_mp(alpha: complex, sigma: float, m_max: int, dps: int) -> list:
    """``A_m`` for ``m = 0..m_max`` via ``I_{m+1} = alpha I_m + (m/sigma^2) I_{m-1}`` at ``dps`` digits."""
    with mpmath.workdps(dps):
        a = mpmath.mpc(alpha.real, alpha.imag)
        s2 = mpmath.mpf(sigma) ** 2
        i_prev = mpmath.mpc(0)
        i_cur = mpmath.sqrt(2 * mpmath.pi) / mpmath.mpf(sigma)
        factor = mpmath.mpc(0, -2)
        scale = 1 / (2 * mpmath.pi)
        out = []
        power = mpmath.mpc(1)
        for m in range(m_max + 1):
            out.append(power * i_cur * scale)
            i_prev, i_cur = i_cur, a * i_cur + (m / s2) * i_prev
            power *= factor
        return out


def _bessel_mp(x, m_max: int, dps: int) -> list:
    """``J_0..J_{m_max}`` at real ``x`` by normalised backward recurrence."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        if x == 0:
            return [mpmath.mpf(1)] + [mpmath.mpf(0)] * m_max
        start = m_max + 20 + int(2 * float(x)) + int(dps)
        vals = [mpmath.mpf(0)] * (start + 2)
        vals[start] = mpmath.mpf(1)
        two_over_x = 2 / x
        for k in range(start, 0, -1):
            vals[k - 1] = k * two_over_x * vals[k] - vals[k + 1]
        norm = vals[0] + 2 * mpmath.fsum(vals[2:start + 1:2])
        return [v / norm for v in vals[:m_max + 1]]


def _negative_moments_mp(alpha: complex, sigma: float, n_max: int, dps: int) -> list:
    """``A_{-n}`` for ``n = 1..n_max`` at ``dps`` digits.

    Seeds ``I_0 = sqrt(2pi)/sigma`` and ``I_{-1} = -i pi w(alpha sigma/sqrt2)``
    and runs ``m I_{m-1} = sigma^2 (I_{m+1} - alpha I_m)`` downwards.  The
    moments shrink by many orders of magnitude, so the working precision
    grows with ``n_max``.
    """
    with mpmath.workdps(dps + n_max):
        a = mpmath.mpc(alpha.real, alpha.imag)
        sig = mpmath.mpf(sigma)
        zeta = a * sig / mpmath.sqrt(2)
        w = mpmath.exp(-zeta**2) * mpmath.erfc(-1j * zeta)
        i_up = mpmath.sqrt(2 * mpmath.pi) / sig          # I_0
        i_cur = mpmath.mpc(0, -1) * mpmath.pi * w         # I_{-1}
        factor = 1 / mpmath.mpc(0, -2)
        scale = 1 / (2 * mpmath.pi)
        power = factor
        out = [power * i_cur * scale]
        for m in range(-1, -n_max, -1):
            i_up, i_cur = i_cur, sig**2 * (i_up - a * i_cur) / m
            power *= factor
            out.append(power * i_cur * scale)
        return out


def intensity_bessel(t_grid, params: PhysicalParams, pulse: GaussianPulse, *,
                     floor: float = 1e-8, rel_tol: float = 1e-12, m_cap: int | None = None,
                     max_negative: int = 400) -> TimeTrace:
    """Transmitted intensity through a continuous medium from the Bessel series.

    ``I/I0 = 2 pi sigma^2 exp(-gamma_prime s) |sum_m A_m (s/(OD gamma_prime))^(m/2) J_m(sqrt(OD gamma_prime s))|^2``
    with ``s`` the time after the pulse centre (``s >= 0``).  The
    ``2 pi sigma^2`` factor converts the series' unit-area pulse into a
    unit-peak one.

    Parameters
    ----------
    floor : float
        Intensities below this are not resolved to full relative accuracy.
    rel_tol : float
        Truncation: stop once three consecutive terms fall below ``rel_tol``
        times the partial sum.
    m_cap : int, optional
        Hard cap on ``|m|``.  ``None`` lets the cap follow the requested
        times; samples that would need more terms are flagged.

    Returns
    -------
    TimeTrace
        ``flags`` marks samples whose series did not converge within the cap.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    s = t_grid - pulse.t0
    if np.any(s < -1e-12 * max(1.0, abs(pulse.t0))):
        raise ValueError("the Bessel series is evaluated at or after the pulse centre only")
    s = np.maximum(s, 0.0)
    sig = pulse.sigma
    gp = params.gamma_prime
    depth = od(params)
    amp = pulse.peak_amplitude
    norm = math.sqrt(2.0 * math.pi) * sig
    if depth == 0:
        field = amp * np.exp(-(s**2) / (2.0 * sig**2) - 1j * pulse.detuning * s)
        return TimeTrace(t_grid, field, i0=abs(amp) ** 2, flags=np.zeros(s.shape, bool),
                         meta={"model": "bessel"})

    alpha = _offset(pulse, params)
    odg = depth * gp
    x_all = np.sqrt(odg * s)

    # orders and precision needed for the latest sample
    def plan_for(sv: float):
        x = math.sqrt(odg * sv)
        lc = 0.5 * math.log(sv / odg) if sv > 0 else -np.inf
        # log|A_m| ~ m log 2 + log((m-1)!!) - m log sigma up to the offset terms
        m = np.arange(0, int(4.0 * (sv / sig) ** 2 + 8.0 * sv / sig + 200))
        log_a = m * math.log(2.0) + 0.5 * special.gammaln(m + 1.0) - m * math.log(sig) - math.log(norm)
        log_a += m * math.log1p(abs(alpha) * sig)  # crude bound for the offset
        log_term = log_a + (m * lc if sv > 0 else np.where(m == 0, 0.0, -np.inf)) + _log_bessel_bound(m, x)
        log_floor = 0.5 * math.log(floor) + 0.5 * gp * sv - math.log(norm)
        past_peak = np.arange(m.size) > max(int(np.argmax(log_term)), int(x) + 1)
        small = (log_term < log_floor + math.log(rel_tol) - 10.0) & past_peak
        m_need = int(np.argmax(small)) + 3 if small.any() else m.size
        peak = float(np.max(log_term[: m_need + 1]))
        dps = 30 + max(0, int(math.ceil((peak - log_floor) / math.log(10.0))))
        return m_need, dps

    plans = [plan_for(float(sv)) for sv in s]
    m_pos = max(p[0] for p in plans)
    cap = m_pos if m_cap is None else min(m_pos, m_cap)
    dps_max = max(p[1] for p in plans)
    a_pos = _positive_moments_mp(alpha, sig, cap, dps_max)

    # negative orders: terms ~ (OD/2)^n / n!, far from any precision trouble
    x_max = float(x_all.max())
    n_neg = min(max_negative, int(x_max + 0.5 * depth + 40 + 10 * math.sqrt(depth + x_max)))
    a_neg = _negative_moments_mp(alpha, sig, n_neg, dps_max)

    field = np.empty(s.shape, dtype=complex)
    flags = np.zeros(s.shape, dtype=bool)
    for k, sv in enumerate(s):
        m_need, dps = plans[k]
        m_use = min(m_need, cap)
        if m_need > cap:
            flags[k] = True
        if sv == 0:
            # c^-n J_{-n}(x) -> (-odg/2)^n / n! as s -> 0; positive orders vanish
            with mpmath.workdps(dps):
                total = complex(a_pos[0] + mpmath.fsum(
                    a_neg[n - 1] * mpmath.mpf(-0.5 * odg) ** n / mpmath.factorial(n) for n in range(1, n_neg + 1)))
        else:
            with mpmath.workdps(dps):
                x = mpmath.sqrt(mpmath.mpf(odg) * mpmath.mpf(sv))
                bess = _bessel_mp(x, max(m_use, n_neg), dps)
                c = mpmath.sqrt(mpmath.mpf(sv) / mpmath.mpf(odg))
                cpow = mpmath.mpf(1)
                acc = mpmath.mpc(0)
                terms = []
                for m in range(m_use + 1):
                    term = a_pos[m] * cpow * bess[m]
                    acc += term
                    terms.append(abs(term))
                    cpow *= c
                neg = mpmath.mpc(0)
                cinv = 1 / c
                cpow = mpmath.mpf(1)
                for n in range(1, n_neg + 1):
                    cpow *= cinv
                    jn = bess[n] if n % 2 == 0 else -bess[n]
                    neg += a_neg[n - 1] * cpow * jn
                acc += neg
                tail_ok = m_use < 3 or all(terms[-i] <= rel_tol * max(abs(acc), 1e-300) for i in (1, 2, 3))
                if not tail_ok:
                    flags[k] = True
                total = complex(acc)
        field[k] = amp * norm * math.exp(-0.5 * gp * sv) * total
    return TimeTrace(t_grid, field, i0=abs(amp) ** 2, flags=flags, meta={"model": "bessel"})


# -- inhomogeneous broadening --------------------------------------------------

@dataclass(frozen=True)
class BroadeningComponent:
    """Sub-ensemble with partial optical depth ``od_i`` and line shift ``shift_i``."""

    od_i: float
    shift_i: float

    def __post_init__(self):
        if not self.od_i > 0:
            raise ValueError("od_i must be positive")


@dataclass(frozen=True)
class LogNormalSpec:
    """One-sided log-normal distribution of line shifts.

    Shifts are ``direction * exp(mu + s * N(0, 1))`` in the caller's rate
    units; ``weights`` optionally sets unequal OD shares.
    """

    n_components: int = 12
    mu: float = math.log(0.5)
    s: float = 0.6
    od_total: float = 11.6
    seed: int = 0
    direction: int = 1
    weights: tuple | None = None

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if not self.s > 0:
            raise ValueError("log-normal shape s must be positive")
        if self.od_total < 0:
            raise ValueError("od_total must be non-negative")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.weights is not None and len(self.weights) != self.n_components:
            raise ValueError("need one weight per component")


def sample_components(spec: LogNormalSpec) -> list[BroadeningComponent]:
    """Draw the component shifts and split ``od_total`` among them (equal shares by default)."""
    rng = np.random.default_rng(spec.seed)
    shifts = spec.direction * rng.lognormal(spec.mu, spec.s, size=spec.n_components)
    w = np.ones(spec.n_components) if spec.weights is None else np.asarray(spec.weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    ods = spec.od_total * w / w.sum()
    return [BroadeningComponent(float(o), float(sh)) for o, sh in zip(ods, shifts)]


def broadened_function(components, params: PhysicalParams):
    """Callable ``omega -> prod_i T_i(omega)`` over shifted continuum media."""
    if not components:
        raise ValueError("at least one broadening component is required")
    comps = list(components)
    half = 0.5 * params.gamma_prime

    def t_of_omega(omega):
        w = np.asarray(omega, dtype=float) - params.omega_0
        expo = np.zeros(w.shape, dtype=complex)
        # product of exponentials = exponential of the summed exponents
        for c in comps:
            expo += -1j * (0.25 * c.od_i * params.gamma_prime) / (w - c.shift_i + 1j * half)
        return np.exp(expo)

    return t_of_omega


def broadened_transmission(components, omega_grid, params: PhysicalParams) -> TransmissionSpectrum:
    omega_grid = np.asarray(omega_grid, dtype=float)
    return TransmissionSpectrum(omega_grid, broadened_function(components, params)(omega_grid))


def write_components_csv(path, components, rate_to_mhz=lambda r: r):
    """Write components as ``shift_mhz, od_i`` (``rate_to_mhz`` converts shifts)."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shift_mhz", "od_i"])
        for c in components:
            w.writerow([repr(float(rate_to_mhz(c.shift_i))), repr(float(c.od_i))])


def read_components_csv(path, rate_from_mhz=lambda f: f) -> list[BroadeningComponent]:
    out = []
    with open(Path(path), newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                shift, od_i = float(row[0]), float(row[1])
            except ValueError:
                if k == 0:
                    continue
                raise ValueError(f"{path}: bad component row {k + 1}") from None
            out.append(BroadeningComponent(od_i, float(rate_from_mhz(shift))))
    if not out:
        raise ValueError(f"{path}: no components")
    return out
