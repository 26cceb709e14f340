"""N-atom theory: collective modes of the waveguide-mediated interaction.

Atoms sit at propagation phases ``phi_n = k z_n`` along the guide.  In the
single-excitation sector the interaction is the complex-symmetric matrix
``M_nm = -i (gamma_1d/2) exp(i |phi_n - phi_m|)``.  Its eigenvalues
``lambda_xi`` carry the collective shifts ``Re lambda`` and decay rates
``-2 Im lambda``; the eigenvectors, normalised with the bilinear form
``v^T v = 1``, give the overlaps ``eta_xi`` that weight each mode in the
transmission coefficient.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from .core import (
    GaussianPulse,
    PhysicalParams,
    SampledDrive,
    TimeTrace,
    TransmissionSpectrum,
    check_drive_resolution,
    drive_callable,
    od,
)
from .specfun import causal_gaussian_convolution

__all__ = [
    "AtomArray",
    "CollectiveModes",
    "DefectiveMatrixError",
    "lattice_array",
    "random_filling_array",
    "disordered_array",
    "make_array",
    "build_hamiltonian",
    "diagonalize",
    "transmission_n",
    "transmission_direct",
    "transmission_function",
    "closed_form_coefficients",
    "intensity_closed_form",
    "hl_evolve",
    "tau_zero_asymptotic",
]

log = logging.getLogger(__name__)


class DefectiveMatrixError(RuntimeError):
    """The interaction matrix could not be diagonalised to tolerance."""


@dataclass(frozen=True)
class AtomArray:
    """Atom propagation phases ``k z_i`` (sorted, unwrapped) and the ensemble parameters."""

    positions: np.ndarray
    params: PhysicalParams

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 1 or pos.size < 1:
            raise ValueError("an atom array needs at least one atom")
        if not np.all(np.isfinite(pos)):
            raise ValueError("atom positions must be finite")
        if pos.size != self.params.n_atoms:
            raise ValueError(f"{pos.size} positions for n_atoms={self.params.n_atoms}")
        object.__setattr__(self, "positions", np.sort(pos))

    @property
    def n(self) -> int:
        return self.positions.size


def lattice_array(params: PhysicalParams) -> AtomArray:
    """Perfect lattice, ``phi_n = n kd``."""
    return AtomArray(params.kd * np.arange(params.n_atoms), params)


def random_filling_array(params: PhysicalParams, rng=None, n_sites: int | None = None) -> AtomArray:
    """Lattice of ``n_sites`` (default ``2N``) sites with ``N`` of them occupied at random."""
    rng = np.random.default_rng(rng)
    n_sites = 2 * params.n_atoms if n_sites is None else n_sites
    if n_sites < params.n_atoms:
        raise ValueError("fewer lattice sites than atoms")
    sites = np.sort(rng.choice(n_sites, size=params.n_atoms, replace=False))
    return AtomArray(params.kd * sites, params)


def disordered_array(params: PhysicalParams, rng=None) -> AtomArray:
    """Uniformly random placement: independent spacings with phases uniform in ``[0, 2pi)``."""
    rng = np.random.default_rng(rng)
    steps = rng.uniform(0.0, 2.0 * math.pi, size=params.n_atoms)
    steps[0] = 0.0
    return AtomArray(np.cumsum(steps), params)


def make_array(params: PhysicalParams, placement: str = "disordered", rng=None) -> AtomArray:
    if placement == "lattice":
        return lattice_array(params)
    if placement == "filling":
        return random_filling_array(params, rng)
    if placement == "disordered":
        return disordered_array(params, rng)
    raise ValueError(f"unknown placement {placement!r}")


def build_hamiltonian(array: AtomArray) -> np.ndarray:
    """Single-excitation interaction matrix ``-i (gamma_1d/2) exp(i |phi_i - phi_j|)``."""
    phi = array.positions
    return -0.5j * array.params.gamma_1d * np.exp(1j * np.abs(phi[:, None] - phi[None, :]))


@dataclass(frozen=True)
class CollectiveModes:
    """Eigen-decomposition of the interaction matrix.

    ``eigvecs[:, xi]`` is mode ``xi``, normalised so that ``v^T v = 1``.
    """

    lambdas: np.ndarray
    eigvecs: np.ndarray
    etas: np.ndarray

    @property
    def shifts(self) -> np.ndarray:
        return self.lambdas.real

    @property
    def decay_rates(self) -> np.ndarray:
        return -2.0 * self.lambdas.imag

    def __len__(self):
        return self.lambdas.size

    @classmethod
    def empty(cls) -> "CollectiveModes":
        return cls(np.zeros(0, complex), np.zeros((0, 0), complex), np.zeros(0, complex))


def _cluster(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group indices of ``values`` whose members lie within ``tol`` of each other (single linkage)."""
    order = np.argsort(values.real)
    groups: list[list[int]] = []
    for i in order:
        for g in groups:
            if np.min(np.abs(values[g] - values[i])) < tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


def _complex_orthonormalize(vecs: np.ndarray, lambdas: np.ndarray, scale: float) -> np.ndarray:
    """Rescale eigenvectors to ``V^T V = I``.

    Eigenvectors of distinct eigenvalues of a complex-symmetric matrix are
    already orthogonal under the bilinear form; inside a degenerate cluster
    the Gram matrix ``S = V_c^T V_c`` is symmetric and ``V_c S^{-1/2}`` is an
    orthonormal basis of the same subspace.
    """
    out = vecs.astype(complex, copy=True)
    for idx in _cluster(lambdas, 1e-8 * scale):
        block = out[:, idx]
        gram = block.T @ block
        if idx.size == 1:
            out[:, idx] = block / np.sqrt(gram[0, 0])
        else:
            root = linalg.sqrtm(gram)
            out[:, idx] = block @ linalg.inv(root)
    return out


def _eig_modes(matrix: np.ndarray, phases: np.ndarray, scale: float):
    lambdas, vecs = linalg.eig(matrix)
    vecs = _complex_orthonormalize(vecs, lambdas, scale)
    n = matrix.shape[0]
    ortho_err = np.max(np.abs(vecs.T @ vecs - np.eye(n)))
    recon_err = np.max(np.abs((vecs * lambdas) @ vecs.T - matrix)) / scale
    drive = np.exp(1j * phases)
    etas = (np.conj(drive) @ vecs) * (drive @ vecs)
    return lambdas, vecs, etas, max(ortho_err, recon_err)


def diagonalize(matrix_or_array, tol: float = 1e-8, *, rng=None) -> CollectiveModes:
    """Eigenmodes, bilinear normalisation and overlaps ``eta_xi``.

    Accepts an :class:`AtomArray` (preferred: the overlaps need the atom
    phases) or a bare matrix built on a perfect lattice with ``kd`` unknown,
    in which case ``eta`` is left as NaN.  A matrix that is defective to
    within ``tol`` triggers one retry with positions jittered by 1e-10.
    """
    if isinstance(matrix_or_array, AtomArray):
        array = matrix_or_array
        matrix = build_hamiltonian(array)
        phases = array.positions
    else:
        array = None
        matrix = np.asarray(matrix_or_array, dtype=complex)
        phases = None
    n = matrix.shape[0]
    if n == 0:
        return CollectiveModes.empty()
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-13 * max(np.abs(matrix).max(), 1e-300)):
        raise ValueError("interaction matrix must be complex-symmetric")
    scale = max(np.abs(matrix).max() * n, 1e-300)
    use_phases = phases if phases is not None else np.zeros(n)
    lambdas, vecs, etas, err = _eig_modes(matrix, use_phases, scale)
    if err > tol and array is not None:
        log.warning("near-defective interaction matrix (err=%.2e); jittering positions", err)
        rng = np.random.default_rng(rng)
        jittered = AtomArray(array.positions + 1e-10 * rng.standard_normal(n), array.params)
        matrix = build_hamiltonian(jittered)
        lambdas, vecs, etas, err = _eig_modes(matrix, jittered.positions, scale)
    if err > tol:
        raise DefectiveMatrixError(f"eigendecomposition residual {err:.2e} exceeds {tol:.1e}")
    if phases is None:
        etas = np.full(n, np.nan + 0j)
    order = np.argsort(lambdas.imag)  # most superradiant first
    return CollectiveModes(lambdas[order], vecs[:, order], etas[order])


def _poles_check(modes: CollectiveModes, params: PhysicalParams):
    if params.gamma_prime <= 0 and np.any(np.abs(modes.lambdas.imag) < 1e-15):
        raise ZeroDivisionError("transmission pole on the real frequency axis")


def transmission_function(modes: CollectiveModes, params: PhysicalParams):
    """Callable ``omega -> T(omega)`` built from the mode expansion."""
    _poles_check(modes, params)
    pref = -0.5j * params.gamma_1d
    poles = modes.lambdas - 0.5j * params.gamma_prime
    etas = modes.etas

    def t_of_omega(omega):
        w = np.asarray(omega, dtype=float) - params.omega_0
        if etas.size == 0:
            return np.ones_like(w, dtype=complex)
        flat = w.reshape(-1)
        out = np.empty(flat.shape, dtype=complex)
        # chunked to bound memory for large N x grid products
        step = max(1, 2_000_000 // max(etas.size, 1))
        for i in range(0, flat.size, step):
            wc = flat[i:i + step]
            out[i:i + step] = 1.0 + pref * (etas[None, :] / (wc[:, None] - poles[None, :])).sum(axis=1)
        return out.reshape(w.shape)

    return t_of_omega


def transmission_n(modes: CollectiveModes, params: PhysicalParams, omega_grid) -> TransmissionSpectrum:
    """Transmission coefficient of the N-atom array from its collective modes."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    return TransmissionSpectrum(omega_grid, transmission_function(modes, params)(omega_grid))


def transmission_direct(array: AtomArray, omega_grid) -> TransmissionSpectrum:
    """Same coefficient by a direct linear solve at each frequency (no eigenmodes)."""
    params = array.params
    omega_grid = np.asarray(omega_grid, dtype=float)
    matrix = build_hamiltonian(array)
    drive = np.exp(1j * array.positions)
    out = np.empty(omega_grid.shape, dtype=complex)
    eye = np.eye(array.n)
    for k, w in enumerate(omega_grid):
        x = np.linalg.solve((w - params.omega_0 + 0.5j * params.gamma_prime) * eye - matrix, drive)
        out[k] = 1.0 - 0.5j * params.gamma_1d * (np.conj(drive) @ x)
    return TransmissionSpectrum(omega_grid, out)


def closed_form_coefficients(pulse: GaussianPulse, modes: CollectiveModes, params: PhysicalParams):
    """Mode amplitudes ``a_xi`` and time offsets ``b_xi`` of the Gaussian-pulse closed form.

    Returned as plain complex arrays; ``a`` may overflow for very long
    pulses, which is why :func:`intensity_closed_form` does not use it.
    """
    sig = pulse.sigma
    alpha = pulse.detuning + 0.5j * params.gamma_prime - modes.lambdas
    with np.errstate(over="ignore"):
        a = modes.etas * np.exp(-0.5 * alpha**2 * sig**2)
    b = -1j * alpha * sig**2
    return a, b


def intensity_closed_form(pulse: GaussianPulse, modes: CollectiveModes, params: PhysicalParams,
                          t_grid) -> TimeTrace:
    """Transmitted field and intensity of a Gaussian pulse as a sum over collective modes.

    Each mode contributes ``-(gamma_1d/2) eta_xi exp(-i Delta s) K_xi(s)`` with
    ``K_xi`` the causal convolution of the Gaussian with
    ``exp(-(i lambda_xi + gamma_prime/2 - i Delta) s)``; ``s`` is time from the
    pulse centre.  Evaluating ``K`` through the Faddeeva function keeps the
    ``exp(-(alpha sigma)^2/2)`` and ``erfc`` factors recombined, so large
    ``sigma * Gamma_xi`` cannot overflow.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    s = t_grid - pulse.t0
    sig = pulse.sigma
    amp = pulse.peak_amplitude
    carrier = np.exp(-1j * pulse.detuning * s)
    field = amp * np.exp(-(s**2) / (2.0 * sig**2)) * carrier
    scattered = np.zeros_like(s, dtype=complex)
    active = np.abs(modes.etas) > 0
    for lam, eta in zip(modes.lambdas[active], modes.etas[active]):
        rate = 1j * lam + 0.5 * params.gamma_prime - 1j * pulse.detuning
        scattered += eta * causal_gaussian_convolution(s, sig, rate)
    field = field - 0.5 * params.gamma_1d * amp * carrier * scattered
    return TimeTrace(t_grid, field, i0=abs(amp) ** 2, meta={"model": "modes"})


def hl_evolve(drive, array: AtomArray, detuning: float = 0.0, t_grid=None, *,
              rtol: float = 1e-10, atol: float = 1e-14, record: bool = False):
    """Integrate the coupled linear equations for the atomic coherences.

    ``d sigma_n/dt = -(gamma_prime/2) sigma_n + i Omega(t) exp(i phi_n) - i (M sigma)_n``
    in the frame rotating at ``omega_0``; the transmitted field past the last
    atom is ``Omega + i (gamma_1d/2) sum_n exp(-i phi_n) sigma_n``.

    Parameters
    ----------
    drive : SampledDrive or GaussianPulse
        Envelope; ``detuning`` optionally shifts a drive-frame envelope into
        the atomic frame.
    t_grid : array_like, optional
        Output grid (defaults to the drive grid).
    record : bool
        Also return the coherences, shape ``(N, len(t_grid))``.
    """
    params = array.params
    rate_scale = params.gamma_prime + params.n_atoms * params.gamma_1d
    check_drive_resolution(drive, timescale=1.0 / rate_scale)
    if t_grid is None:
        if not isinstance(drive, SampledDrive):
            raise ValueError("t_grid is required with an analytic pulse")
        t_grid = drive.t_grid
    t_grid = np.asarray(t_grid, dtype=float)
    omega, width = drive_callable(drive, detuning)
    peak = abs(drive.peak_amplitude) if isinstance(drive, GaussianPulse) else drive.peak
    if abs(omega(t_grid[0])) > 1e-6 * peak:
        raise ValueError("grid must start before the drive rises above 1e-6 of its peak")
    n = array.n
    if peak == 0:
        trace = TimeTrace(t_grid, np.zeros(t_grid.size, complex), intensity=np.zeros(t_grid.size),
                          meta={"model": "hl"})
        return (trace, np.zeros((n, t_grid.size), complex)) if record else trace
    matrix = build_hamiltonian(array)
    gen = -0.5 * params.gamma_prime * np.eye(n) - 1j * matrix
    couple = np.exp(1j * array.positions)

    def rhs(t, y):
        return gen @ y + 1j * omega(t) * couple


    max_step = min(width, 1.0 / rate_scale) / 8.0
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), np.zeros(n, complex), method="DOP853", t_eval=t_grid,
                    rtol=rtol, atol=atol * peak / params.gamma_prime, max_step=max_step)
    if not sol.success:
        raise RuntimeError(
            f"coherence integration failed ({sol.message}); refine the drive grid or shorten the window")
    sigma = sol.y
    field = omega(t_grid) + 0.5j * params.gamma_1d * (np.conj(couple) @ sigma)
    trace = TimeTrace(t_grid, field, i0=peak**2, meta={"model": "hl"})
    return (trace, sigma) if record else trace


def tau_zero_asymptotic(params: PhysicalParams) -> float:
    """Large-OD estimate of the first-zero delay after the pulse centre, ``4 / (OD gamma_prime)``."""
    depth = od(params)
    if depth <= 0:
        raise ValueError("the first-zero estimate needs OD > 0")
    return 4.0 / (depth * params.gamma_prime)
