import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralnet.analytic import (
    analytic_concurrence_undriven,
    analytic_me_coherences_undriven,
    analytic_single_driven_chiral,
    analytic_undriven_amplitudes,
    analytic_weak_driving_amplitudes,
    printed_concurrence_undriven,
    torrey_roots_weak_driving,
    weak_drive_determinant,
)
from chiralnet.errors import DegenerateRootsError, IntegrationError, ParameterError
from chiralnet.markov import ChiralMarkovParams, build_liouvillian, drive_sweep, flux_to_rates, integrate_markov
from chiralnet.quantum import KET_EG, KET_GG, devectorize, projector, vectorize
from chiralnet.trajectory import first_peak_index

import oracles

EG = projector(KET_EG)
GG = projector(KET_GG)
rates = st.floats(0.0, 2.0)


def test_zero_generator():
    assert np.abs(build_liouvillian(ChiralMarkovParams(gamma_L=0, gamma_R=0))).max() == 0


@given(rates, rates, st.floats(-math.pi, math.pi), st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_generator_matches_master_equation_in_matrix_form(gl, gr, phi, w1, w2, seed):
    rho = oracles.random_density(4, np.random.default_rng(seed))
    gen = build_liouvillian(ChiralMarkovParams(gl, gr, phi, omega_1=w1, omega_2=w2))
    got = devectorize(gen @ vectorize(rho))
    assert np.abs(got - oracles.cascaded_rhs(gl, gr, phi, w1, w2)(rho)).max() < 1e-12


@given(rates, rates, st.floats(-math.pi, math.pi), st.floats(-2, 2))
@settings(max_examples=30, deadline=None)
def test_generator_preserves_trace_and_hermiticity(gl, gr, phi, w):
    gen = build_liouvillian(ChiralMarkovParams(gl, gr, phi, omega_1=w))
    out = devectorize(gen @ vectorize(np.eye(4) / 4))
    assert np.abs(out - out.conj().T).max() < 1e-12
    assert abs(np.trace(out)) < 1e-12
    # the identity covector annihilates the generator
    assert np.abs(vectorize(np.eye(4)) @ gen).max() < 1e-12


def test_chiral_decay_of_eg_feeds_gg():
    out = devectorize(build_liouvillian(ChiralMarkovParams(0, 1, 0)) @ vectorize(EG))
    assert out[0, 0].real == pytest.approx(1.0, abs=1e-14)
    assert out[2, 2].real == pytest.approx(-1.0, abs=1e-14)


def test_undriven_chiral_peak():
    traj = integrate_markov(ChiralMarkovParams(0, 1, 0), EG, 10, 0.01)
    t, c = traj.peak()
    assert c == pytest.approx(2 / math.e, abs=1e-3)
    assert t == pytest.approx(1.0, abs=0.01)


def test_ground_state_is_dark():
    traj = integrate_markov(ChiralMarkovParams(0.3, 0.7, 0.4), GG, 5, 0.01)
    assert np.abs(traj["concurrence"]).max() < 1e-12


@pytest.mark.parametrize("gl, gr", [(0.2, 0.8), (0.4, 0.6), (0.5, 0.5)])
@pytest.mark.parametrize("kd", [0.0, math.pi / 6])
def test_undriven_amplitudes_match_integration(gl, gr, kd):
    traj = integrate_markov(ChiralMarkovParams(gl, gr, kd), EG, 10, 0.01)
    c_eg, c_ge = analytic_undriven_amplitudes(gl, gr, kd, traj.times)
    assert np.abs(traj.states[:, 2, 1] - c_eg * np.conj(c_ge)).max() < 1e-6
    assert np.abs(traj.states[:, 2, 2] - np.abs(c_eg) ** 2).max() < 1e-6
    assert np.abs(traj["concurrence"] - analytic_concurrence_undriven(gl, gr, kd, traj.times)).max() < 1e-6


@pytest.mark.parametrize("gl, gr, kd", [(0.3, 0.7, math.pi / 6), (0.5, 0.5, 0.0), (0.2, 0.8, 2.0)])
def test_coherence_closed_form_matches_master_equation_ode(gl, gr, kd):
    times = np.linspace(0, 6, 61)
    ref = oracles.solve_matrix_ode(oracles.cascaded_rhs(gl, gr, kd), EG, times)
    z = np.exp(-1j * kd) * ref[:, 2, 1]
    z1, z2 = analytic_me_coherences_undriven(gl, gr, kd, times)
    assert np.abs(z.real - z1).max() < 1e-9
    assert np.abs(z.imag - z2).max() < 1e-9


def test_coherence_closed_form_limits():
    t = np.linspace(0, 5, 11)
    z1, z2 = analytic_me_coherences_undriven(0.3, 0.7, 0.0, t)
    assert z1[0] == 0 and z2[0] == 0
    assert np.abs(z2).max() == 0
    y1, y2 = analytic_me_coherences_undriven(0.5, 0.5, 0.0, t)
    assert np.abs(analytic_concurrence_undriven(0.5, 0.5, 0.0, t) - 2 * np.hypot(y1, y2)).max() < 1e-9


def test_printed_prefactor_one_matches_amplitudes():
    t = np.linspace(0.01, 8, 200)
    exact = analytic_concurrence_undriven(0.3, 0.7, 0.4, t)
    assert np.abs(printed_concurrence_undriven(0.3, 0.7, 0.4, t, 1.0) - exact).max() < 1e-12
    assert np.abs(printed_concurrence_undriven(0.3, 0.7, 0.4, t, 2.0) - exact).max() > 0.1


def test_undriven_amplitude_limits():
    c_eg, c_ge = analytic_undriven_amplitudes(0.2, 0.8, 0.3, 0.0)
    assert c_eg == 1 and c_ge == 0
    t = np.linspace(0, 5, 5001)
    c = analytic_concurrence_undriven(0.0, 1.0, 0.0, t)
    assert c.max() == pytest.approx(2 / math.e, abs=1e-9)
    assert t[np.argmax(c)] == pytest.approx(1.0, abs=1e-3)
    near = analytic_concurrence_undriven(1e-9, 1.0, 0.0, t)
    assert np.abs(near - c).max() < 1e-6


def test_single_driven_limits():
    t = np.linspace(0, 10, 10001)
    assert analytic_single_driven_chiral(0.3, 1.0, 0.0)[2] == 0
    assert analytic_single_driven_chiral(1e-6, 1.0, t)[2].max() == pytest.approx(2 / math.e, abs=1e-6)


def test_single_driven_truncation_scales_as_drive_squared():
    errors = []
    drives = (0.02, 0.01, 0.005)
    for w in drives:
        traj = integrate_markov(ChiralMarkovParams(0, 1, 0, omega_1=w), EG, 10, 0.01)
        errors.append(np.abs(analytic_single_driven_chiral(w, 1.0, traj.times)[2] - traj["concurrence"]).max())
    slopes = np.diff(np.log(errors)) / np.diff(np.log(drives))
    assert np.all(np.abs(slopes - 2) < 0.1)


@pytest.mark.xfail(strict=True, reason="measured 1.7e-2 at drive 0.1: the O(drive^2) jump-feedback term is larger than 2e-3")
def test_single_driven_matches_integration_at_drive_tenth():
    traj = integrate_markov(ChiralMarkovParams(0, 1, 0, omega_1=0.1), EG, 10, 0.01)
    assert np.abs(analytic_single_driven_chiral(0.1, 1.0, traj.times)[2] - traj["concurrence"]).max() < 2e-3


def test_torrey_roots_at_zero_drive():
    r = torrey_roots_weak_driving(0.2, 0.8, 0.0)
    gbar, root = 0.5, math.sqrt(0.16)
    assert np.allclose(r.roots, (0, -gbar + root, -gbar - root), atol=1e-15)


def test_torrey_coefficients_reduce_to_kd_zero_forms():
    gl, gr = 0.2, 0.8
    a0, a1, a2 = torrey_roots_weak_driving(gl, gr, 0.1).a_coeffs
    assert a0 == pytest.approx(-0.5 / (gl - gr) ** 2)
    assert a1 == pytest.approx(1 / (4 * (math.sqrt(gl) - math.sqrt(gr)) ** 2))
    assert a2 == pytest.approx(1 / (4 * (math.sqrt(gl) + math.sqrt(gr)) ** 2))


@pytest.mark.parametrize("kd", [0.0, 0.5])
def test_torrey_roots_converge_to_cubic_roots_as_drive_to_fourth(kd):
    errors, residuals = [], []
    drives = (0.1, 0.05, 0.025)
    for w in drives:
        r = torrey_roots_weak_driving(0.2, 0.8, w, kd)
        exact = oracles.weak_drive_cubic_roots(0.2, 0.8, w, kd)
        errors.append(max(min(abs(e - s) for e in exact) for s in r.roots))
        residuals.append(max(abs(weak_drive_determinant(s, 0.2, 0.8, w, kd)) for s in r.roots) / w**4)
    slopes = np.diff(np.log(errors)) / np.diff(np.log(drives))
    assert np.all(slopes > 3.7)
    assert max(residuals) < 2.0 and np.ptp(residuals) < 0.2


def test_torrey_degenerate_inputs():
    with pytest.raises(DegenerateRootsError):
        torrey_roots_weak_driving(0.0, 1.0, 0.1)
    with pytest.raises(DegenerateRootsError):
        torrey_roots_weak_driving(0.5, 0.5, 0.1)


def test_weak_driving_amplitudes_initial_condition():
    r = torrey_roots_weak_driving(0.2, 0.8, 0.1)
    c_eg, c_ge = analytic_weak_driving_amplitudes(r, 0.2, 0.8, 0.0, 0.0)
    assert abs(c_eg - 1) < 1e-12 and abs(c_ge) < 1e-12


def _weak_drive_curves():
    t = np.linspace(0, 10, 1001)
    r = torrey_roots_weak_driving(0.2, 0.8, 0.1)
    c_eg, c_ge = analytic_weak_driving_amplitudes(r, 0.2, 0.8, 0.0, t)
    return t, 2 * np.abs(c_eg * np.conj(c_ge))


@pytest.mark.xfail(strict=True, reason="measured first-bump gap 2.23e-3 against the 2e-3 tolerance")
def test_weak_drive_first_bump_matches_undriven():
    t, c = _weak_drive_curves()
    c0 = analytic_concurrence_undriven(0.2, 0.8, 0.0, t)
    assert abs(c[first_peak_index(c)] - c0[first_peak_index(c0)]) < 2e-3


def test_weak_drive_first_bump_close_to_undriven():
    t, c = _weak_drive_curves()
    c0 = analytic_concurrence_undriven(0.2, 0.8, 0.0, t)
    assert abs(c[first_peak_index(c)] - c0[first_peak_index(c0)]) < 5e-3


@pytest.mark.xfail(strict=True, reason="measured 3.1e-2: the three-pole amplitudes drop re-excitation from |gg>")
def test_weak_drive_matches_integration():
    t, c = _weak_drive_curves()
    traj = integrate_markov(ChiralMarkovParams(0.2, 0.8, 0.0, omega_1=0.1), EG, 10, 0.01)
    assert np.abs(c - traj["concurrence"]).max() < 5e-3


def test_flux_to_rates():
    assert flux_to_rates(math.pi / 4, 2.0) == pytest.approx((0.0, 2.0))
    assert flux_to_rates(0.0, 2.0) == pytest.approx((1.0, 1.0))
    assert flux_to_rates(-math.pi / 4, 2.0) == pytest.approx((2.0, 0.0))
    with pytest.raises(ParameterError):
        flux_to_rates(0.0, 0.0)


@given(st.floats(0.01, 0.99))
@settings(max_examples=20, deadline=None)
def test_with_beta_keeps_total_rate(beta):
    p = ChiralMarkovParams.with_beta(beta, 1.0, gamma_tot=1.3)
    assert p.gamma_tot == pytest.approx((1.3, 1.3))
    assert p.beta == pytest.approx((beta, 1.0))


def test_invalid_rates_are_named():
    with pytest.raises(ParameterError) as info:
        ChiralMarkovParams(gamma_L=-1.0, gamma_loss=(0.0, math.nan))
    assert info.value.details["fields"] == ["gamma_L", "gamma_loss[1]"]


def test_trace_drift_guard():
    with pytest.raises(IntegrationError):
        integrate_markov(ChiralMarkovParams(0, 50, 0, omega_1=40), EG, 1.0, 0.2)


def test_drive_sweep_matches_single_runs():
    surf = drive_sweep(ChiralMarkovParams(0, 1, 0), [0.0, 1.0], [0.0, 0.5], GG, 5, 0.01)
    for i, w1 in enumerate(surf.omega_1):
        for j, w2 in enumerate(surf.omega_2):
            traj = integrate_markov(ChiralMarkovParams(0, 1, 0, omega_1=w1, omega_2=w2), GG, 5, 0.01)
            assert surf.max_concurrence[i, j] == pytest.approx(traj["concurrence"].max(), abs=1e-12)
            assert surf.max_fidelity[i, j] == pytest.approx(traj["bell_fidelity"].max(), abs=1e-12)


def test_strong_drive_sweep_stays_within_clip_tolerance():
    # RK4 truncation at Omega dt = 0.1 dips below zero by less than the engine tolerance
    surf = drive_sweep(ChiralMarkovParams(0, 1, 0), [10.0], [10.0], GG, 10, 0.01)
    assert 0 <= surf.max_concurrence[0, 0] <= 1
