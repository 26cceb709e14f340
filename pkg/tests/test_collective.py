import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynbeats.collective import (
    AtomArray,
    CollectiveModes,
    build_hamiltonian,
    closed_form_coefficients,
    diagonalize,
    disordered_array,
    hl_evolve,
    intensity_closed_form,
    lattice_array,
    make_array,
    random_filling_array,
    tau_zero_asymptotic,
    transmission_direct,
    transmission_function,
    transmission_n,
)
from dynbeats.core import GaussianPulse, PhysicalParams
from dynbeats.singlemode import simulate


def _array(n, depth, seed, placement="disordered", kd=math.pi / 2):
    p = PhysicalParams.from_od(depth, n, kd=kd)
    return make_array(p, placement, np.random.default_rng(seed))


def test_hamiltonian_is_complex_symmetric():
    arr = _array(12, 5.0, 1)
    m = build_hamiltonian(arr)
    np.testing.assert_allclose(m, m.T, atol=0)
    np.testing.assert_allclose(np.diag(m), -0.5j * arr.params.gamma_1d)


def test_mirror_configuration_single_bright_mode():
    p = PhysicalParams.from_od(11.6, 40, kd=math.pi)
    modes = diagonalize(lattice_array(p))
    assert modes.lambdas[0] == pytest.approx(-0.5j * 40 * p.gamma_1d, abs=1e-12)
    assert modes.etas[0] == pytest.approx(40, abs=1e-9)
    np.testing.assert_allclose(modes.etas[1:], 0, atol=1e-9)
    np.testing.assert_allclose(modes.lambdas[1:], 0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.floats(0.5, 20), st.integers(0, 2**31))
def test_mode_sum_rules(n, depth, seed):
    arr = _array(n, depth, seed)
    modes = diagonalize(arr)
    assert abs(modes.etas.sum() - n) < 1e-8 * n
    assert abs(modes.lambdas.sum() + 0.5j * n * arr.params.gamma_1d) < 1e-10 * n
    v = modes.eigvecs
    assert np.max(np.abs(v.T @ v - np.eye(n))) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 25), st.floats(0.1, 20), st.integers(0, 2**31))
def test_modes_are_passive(n, depth, seed):
    modes = diagonalize(_array(n, depth, seed))
    assert np.all(modes.decay_rates >= -1e-12)


@pytest.mark.parametrize("placement", ["disordered", "lattice", "filling"])
def test_mode_expansion_matches_direct_solve(placement):
    arr = _array(15, 8.0, 3, placement)
    w = np.linspace(-15, 15, 301)
    a = transmission_n(diagonalize(arr), arr.params, w).t_coeff
    b = transmission_direct(arr, w).t_coeff
    assert np.max(np.abs(a - b)) < 1e-12


def test_transmission_is_passive_and_tends_to_one():
    arr = _array(20, 10.0, 4)
    t = transmission_function(diagonalize(arr), arr.params)
    assert np.all(np.abs(t(np.linspace(-50, 50, 2001))) <= 1 + 1e-12)
    assert abs(t(1e7) - 1) < 1e-5


def test_mirror_transmission_is_single_lorentzian():
    p = PhysicalParams.from_od(6.0, 30, kd=math.pi)
    w = np.linspace(-10, 10, 101)
    t = transmission_n(diagonalize(lattice_array(p)), p, w).t_coeff
    ref = 1 - 0.5j * 30 * p.gamma_1d / (w + 0.5j * (1 + 6.0 / 2))
    np.testing.assert_allclose(t, ref, atol=1e-12)


def test_random_arrays_are_seeded():
    p = PhysicalParams.from_od(4.0, 10)
    a = disordered_array(p, np.random.default_rng(5)).positions
    b = disordered_array(p, np.random.default_rng(5)).positions
    np.testing.assert_array_equal(a, b)
    f = random_filling_array(p, np.random.default_rng(5)).positions
    assert np.allclose(np.round(f / p.kd), f / p.kd)


def test_array_validation():
    p = PhysicalParams.from_od(1.0, 3)
    with pytest.raises(ValueError):
        AtomArray(np.zeros(2), p)
    with pytest.raises(ValueError):
        make_array(p, "spiral")


def test_diagonalize_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        diagonalize(np.array([[0, 1], [0, 0]], complex))


def test_empty_modes_transmit_everything():
    p = PhysicalParams.from_od(0.0, 5)
    t = transmission_function(CollectiveModes.empty(), p)
    np.testing.assert_allclose(t(np.linspace(-1, 1, 5)), 1.0)


def test_bare_matrix_gives_nan_overlaps():
    m = build_hamiltonian(_array(4, 2.0, 0))
    assert np.all(np.isnan(diagonalize(m).etas))


def test_closed_form_coefficients_finite_for_short_pulse():
    arr = _array(10, 5.0, 2)
    pulse = GaussianPulse(fwhm=0.3, t0=1.0)
    a, b = closed_form_coefficients(pulse, diagonalize(arr), arr.params)
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))


@pytest.mark.parametrize("detuning", [0.0, 2.0])
def test_closed_form_matches_hl(detuning):
    arr = _array(12, 9.0, 7)
    pulse = GaussianPulse(fwhm=0.35, t0=2.0, detuning=detuning)
    t = np.linspace(0, 10, 2001)
    a = intensity_closed_form(pulse, diagonalize(arr), arr.params, t)
    b = hl_evolve(pulse, arr, t_grid=t)
    assert np.linalg.norm(a.field - b.field) / np.linalg.norm(b.field) < 1e-7


def test_hl_accepts_sampled_drive_and_records_coherences():
    arr = _array(6, 4.0, 9)
    pulse = GaussianPulse(fwhm=0.5, t0=2.0)
    t = np.linspace(0, 6, 1201)
    tr, coh = hl_evolve(pulse.sampled(t), arr, record=True)
    assert coh.shape == (6, t.size)
    ref = intensity_closed_form(pulse, diagonalize(arr), arr.params, t)
    assert np.linalg.norm(tr.field - ref.field) / np.linalg.norm(ref.field) < 1e-6


def test_hl_rejects_loud_start():
    arr = _array(4, 2.0, 1)
    with pytest.raises(ValueError):
        hl_evolve(GaussianPulse(fwhm=1.0, t0=0.0), arr, t_grid=np.linspace(0, 2, 11))


def test_mirror_closed_form_equals_single_mode():
    p = PhysicalParams.from_od(11.6, 40, kd=math.pi)
    pulse = GaussianPulse(fwhm=0.33, t0=1.0)
    t = np.linspace(0, 10, 2001)
    a = intensity_closed_form(pulse, diagonalize(lattice_array(p)), p, t)
    b = simulate(pulse, p, t, method="analytic").trace
    assert np.linalg.norm(a.field - b.field) / np.linalg.norm(b.field) < 1e-12


def test_tau_zero_asymptotic():
    p = PhysicalParams.from_od(40.0, 100)
    assert tau_zero_asymptotic(p) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        tau_zero_asymptotic(PhysicalParams.from_od(0.0, 3))
