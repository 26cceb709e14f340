"""Special-function kernels.

Thin, vectorised wrappers around the Faddeeva function, the complementary
error function of complex argument, integer-order Bessel functions of the
first kind and Gaussian moments about a complex offset.  Everything here is a
pure function of its inputs.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

__all__ = [
    "SpecialFunctionDomainError",
    "faddeeva",
    "erfc_complex",
    "bessel_j",
    "gaussian_moment",
    "causal_gaussian_convolution",
]

BESSEL_MAX_ORDER = 500
BESSEL_MAX_ARG = 1.0e4
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


class SpecialFunctionDomainError(ValueError):
    """Argument outside the documented domain of a kernel."""


def faddeeva(z):
    """Scaled complex complementary error function ``w(z) = exp(-z**2) erfc(-iz)``.

    Parameters
    ----------
    z : complex or array_like
        Finite argument(s).

    Returns
    -------
    complex or ndarray
        ``w(z)``.

    Raises
    ------
    OverflowError
        If the result saturates (``Im z`` very negative with large ``|z|``).
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise SpecialFunctionDomainError("faddeeva requires finite arguments")
    with np.errstate(over="ignore", invalid="ignore"):
        out = special.wofz(z)
    if not np.all(np.isfinite(out)):
        bad = z[~np.isfinite(out)].ravel()[0]
        raise OverflowError(f"faddeeva overflow at z={bad!r}")
    return out[()] if out.ndim == 0 else out


def erfc_complex(z):
    """Complementary error function of complex argument.

    Uses ``erfc(z) = exp(-z**2) w(iz)`` in the right half plane and the
    reflection ``erfc(z) = 2 - erfc(-z)`` in the left one, so the Faddeeva
    factor stays bounded.
    """
    z = np.asarray(z, dtype=complex)
    right = z.real >= 0
    zz = np.where(right, z, -z)
    with np.errstate(over="ignore", under="ignore"):
        val = np.exp(-zz * zz) * faddeeva(1j * zz)
    out = np.where(right, val, 2.0 - val)
    return out[()] if out.ndim == 0 else out


def bessel_j(m, x):
    """Bessel function of the first kind ``J_m(x)`` for integer order.

    Parameters
    ----------
    m : int or array_like of int
        Order, ``|m| <= 500``.
    x : float or array_like
        Argument, ``0 <= x <= 1e4``.
    """
    m_arr = np.asarray(m)
    x_arr = np.asarray(x, dtype=float)
    if not np.issubdtype(m_arr.dtype, np.integer):
        if not np.all(m_arr == np.round(m_arr)):
            raise SpecialFunctionDomainError("bessel_j requires integer order")
        m_arr = m_arr.astype(int)
    if np.any(np.abs(m_arr) > BESSEL_MAX_ORDER):
        raise SpecialFunctionDomainError(f"|m| must be <= {BESSEL_MAX_ORDER}")
    if np.any(x_arr < 0) or np.any(x_arr > BESSEL_MAX_ARG) or not np.all(np.isfinite(x_arr)):
        raise SpecialFunctionDomainError(f"x must lie in [0, {BESSEL_MAX_ARG:g}]")
    # J_{-m} = (-1)^m J_m keeps scipy on the well-tested non-negative branch.
    sign = np.where((m_arr < 0) & (np.abs(m_arr) % 2 == 1), -1.0, 1.0)
    out = sign * special.jv(np.abs(m_arr), x_arr)
    return out[()] if out.ndim == 0 else out


def gaussian_moment(m: int, alpha, sigma: float) -> complex:
    """``(1/2pi) * integral (z + alpha)**m exp(-sigma**2 z**2 / 2) dz`` over the real line.

    Closed form from the binomial expansion over the central moments
    ``integral z**k exp(-sigma**2 z**2/2) dz = sqrt(2pi)/sigma * (k-1)!! / sigma**k``
    (zero for odd ``k``).
    """
    if m < 0:
        raise ValueError("gaussian_moment needs m >= 0")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    alpha = complex(alpha)
    total = 0j
    central = 1.0  # (k-1)!! / sigma**k for even k
    for k in range(0, m + 1, 2):
        if k > 0:
            central *= (k - 1) / sigma**2
        total += math.comb(m, k) * alpha ** (m - k) * central
    return total / (math.sqrt(2.0 * math.pi) * sigma)


def causal_gaussian_convolution(s, sigma: float, rate):
    """Evaluate ``K(s) = integral_{-inf}^{s} exp(-rate (s - u)) exp(-u**2 / (2 sigma**2)) du``.

    This is the response of a damped oscillator with complex rate ``rate``
    (``Re rate > 0``) to a unit-peak Gaussian.  The closed form is
    ``sigma sqrt(pi/2) exp(rate**2 sigma**2/2 - rate s) erfc((rate sigma**2 - s)/(sqrt(2) sigma))``;
    the exponential prefactor and the erfc are recombined through the
    Faddeeva function so nothing overflows for large ``sigma * rate`` or late
    times.
    """
    s_in = np.asarray(s, dtype=float)
    s = np.atleast_1d(s_in)
    rate = complex(rate)
    root2s = math.sqrt(2.0) * sigma
    z = (rate * sigma**2 - s) / root2s
    gauss = np.exp(-(s**2) / (2.0 * sigma**2))
    out = np.empty(np.broadcast(s, z).shape, dtype=complex)
    right = z.real >= 0
    if np.any(right):
        out[right] = gauss[right] * faddeeva(1j * z[right])
    left = ~right
    if np.any(left):
        sl = s[left]
        decay = np.exp(rate**2 * sigma**2 / 2.0 - rate * sl)
        out[left] = 2.0 * decay - gauss[left] * faddeeva(-1j * z[left])
    out *= sigma * _SQRT_HALF_PI
    return out.reshape(s_in.shape)[()] if s_in.ndim == 0 else out
