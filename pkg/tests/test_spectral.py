import numpy as np
import pytest

from dynbeats.collective import diagonalize, intensity_closed_form, make_array, transmission_function
from dynbeats.core import GaussianPulse, PhysicalParams, TransmissionSpectrum
from dynbeats.spectral import AliasingError, GridPolicy, frequency_grid, transmit_pulse

PULSE = GaussianPulse(fwhm=0.33, t0=1.0)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_policy_validation():
    with pytest.raises(ValueError):
        GridPolicy(span_factor=10)
    with pytest.raises(ValueError):
        GridPolicy(n_points=3000)
    assert GridPolicy().doubled().n_points == 2**14


def test_identity_filter():
    tr = transmit_pulse(lambda w: np.ones_like(w, complex), PULSE)
    assert np.max(np.abs(tr.field - PULSE(tr.t_grid))) < 1e-10


def test_delay_filter_sign_convention():
    tau = 0.8
    t = np.linspace(0, 6, 601)
    tr = transmit_pulse(lambda w: np.exp(1j * w * tau), PULSE, t_eval=t)
    assert np.max(np.abs(tr.field - PULSE(t - tau))) < 1e-10


def test_parseval():
    params = PhysicalParams.from_od(5.0, 10)
    arr = make_array(params, "disordered", np.random.default_rng(0))
    t_fn = transmission_function(diagonalize(arr), params)
    grid = frequency_grid(PULSE, rate_scale=params.collective_rate)
    from dynbeats.core import pulse_spectrum
    spec = t_fn(grid.omega) * pulse_spectrum(PULSE, grid.omega)
    e_freq = np.sum(np.abs(spec) ** 2) * grid.d_omega / (2 * np.pi)
    tr = transmit_pulse(t_fn, PULSE, rate_scale=params.collective_rate)
    e_time = np.sum(np.abs(tr.field) ** 2) * grid.dt
    assert abs(e_freq - e_time) / e_time < 1e-9


def test_linearity():
    p2 = GaussianPulse(fwhm=0.33, t0=1.0, peak_amplitude=2.5 - 1j)
    t = np.linspace(0, 5, 301)
    t_fn = lambda w: np.exp(-1j * 3.0 / (w + 0.5j))  # noqa: E731
    a = transmit_pulse(t_fn, PULSE, t_eval=t).field
    b = transmit_pulse(t_fn, p2, t_eval=t).field
    assert np.max(np.abs(b - (2.5 - 1j) * a)) < 1e-10 * np.max(np.abs(b))


def test_grid_doubling_self_convergence():
    params = PhysicalParams.from_od(11.6, 20)
    arr = make_array(params, "disordered", np.random.default_rng(1))
    t_fn = transmission_function(diagonalize(arr), params)
    t = np.linspace(0, 10, 1001)
    a = transmit_pulse(t_fn, PULSE, GridPolicy(), rate_scale=params.collective_rate, t_eval=t)
    b = transmit_pulse(t_fn, PULSE, GridPolicy().doubled(), rate_scale=params.collective_rate, t_eval=t)
    assert _rel(a.field, b.field) < 1e-8


def test_matches_closed_form_mode_sum():
    params = PhysicalParams.from_od(7.0, 10)
    arr = make_array(params, "disordered", np.random.default_rng(2))
    modes = diagonalize(arr)
    t = np.linspace(0, 10, 1001)
    a = transmit_pulse(transmission_function(modes, params), PULSE, rate_scale=params.collective_rate, t_eval=t)
    b = intensity_closed_form(PULSE, modes, params, t)
    assert _rel(a.intensity, b.intensity) < 1e-6


def test_native_grid_output_normalised():
    loud = GaussianPulse(fwhm=0.33, t0=1.0, peak_amplitude=3.0)
    tr = transmit_pulse(lambda w: np.ones_like(w, complex), loud, t_eval=[1.0])
    assert tr.intensity[0] == pytest.approx(1.0, rel=1e-9)


def test_sampled_drive_input():
    t = np.linspace(-2, 12, 2801)
    drive = PULSE.sampled(t)
    tr = transmit_pulse(lambda w: np.exp(1j * w * 0.5), drive, t_eval=t[200:2000])
    assert np.max(np.abs(tr.field - PULSE(t[200:2000] - 0.5))) < 1e-6


def test_aliasing_detected():
    # a near-undamped resonance rings far past the synthesis window
    t_fn = lambda w: 1 - 0.5j / (w + 1e-4j)  # noqa: E731
    with pytest.raises(AliasingError):
        transmit_pulse(t_fn, PULSE, GridPolicy(guard_decays=0.0), linewidth=1.0)


def test_unresolved_linewidth_rejected():
    with pytest.raises(ValueError, match="resolve"):
        frequency_grid(PULSE, GridPolicy(t_window=1.0, guard_decays=1.0), linewidth=1e-4)


def test_t_eval_outside_window_rejected():
    with pytest.raises(ValueError):
        transmit_pulse(lambda w: np.ones_like(w, complex), PULSE, t_eval=[1e6])


def test_sampled_spectrum_object():
    grid = frequency_grid(PULSE)
    spec = TransmissionSpectrum(grid.omega, np.ones(grid.n, complex))
    tr = transmit_pulse(spec, PULSE)
    assert np.max(np.abs(tr.field - PULSE(tr.t_grid))) < 1e-10
