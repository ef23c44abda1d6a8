import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthlat.errors import ConfigError, DomainError
from synthlat.model import (
    TWO_PI,
    DriveTone,
    ModeLattice,
    QubitCoupler,
    build_lab_hamiltonian,
    build_rwa_hamiltonian,
    canonical_phase,
    dispersion_analytic,
    effective_flux,
    group_velocity,
    mode_frequency,
)

FSR = 7.33


def ring_spectrum(tones, n, detuning=0.0):
    lat = ModeLattice(0, n - 1, fsr=FSR)
    h = build_rwa_hamiltonian(lat, tones, detuning, ring=True)
    return np.sort(np.linalg.eigvalsh(h.entries)) / TWO_PI


# -- lattice -----------------------------------------------------------------

@pytest.mark.parametrize("m, expected", [(0, 4320.0), (1, 4327.33), (-2, 4305.34)])
def test_mode_frequency(m, expected):
    assert mode_frequency(ModeLattice(), m) == pytest.approx(expected, abs=1e-9)


def test_position_out_of_range_names_span():
    with pytest.raises(DomainError, match="-16"):
        ModeLattice().position(17)


@pytest.mark.parametrize("kwargs", [{"fsr": -1.0}, {"fsr": 0.0}, {"n_left": -1},
                                    {"n_left": 0, "n_right": 0}])
def test_lattice_invariants(kwargs):
    with pytest.raises(ConfigError):
        ModeLattice(**kwargs)


def test_tone_invariants():
    with pytest.raises(ConfigError):
        DriveTone(order=0, freq=7.33)
    with pytest.raises(ConfigError):
        DriveTone(order=1, freq=7.33, strength=-0.1)
    with pytest.warns(UserWarning):
        DriveTone(order=1, freq=10.0).detuning(FSR)
    assert DriveTone(1, 7.13).detuning(FSR) == pytest.approx(-0.2)


def test_kappa_above_device_range_warns():
    with pytest.warns(UserWarning):
        QubitCoupler(kappa=10.0)


# -- lab frame ---------------------------------------------------------------

def test_lab_without_drive_is_diagonal_detunings():
    lat = ModeLattice(2, 3)
    h = build_lab_hamiltonian(lat, t=1.7).entries
    assert np.allclose(h, np.diag(TWO_PI * lat.indices * FSR))


def test_lab_two_modes_odd_parity_entry():
    # absolute indices 592, 593: (-1)^odd * 2g cos(0)
    lat = ModeLattice(0, 1)
    h = build_lab_hamiltonian(lat, [DriveTone(1, FSR, 0.0, 0.1)], t=0.0).entries
    assert h[0, 1] == pytest.approx(-2 * TWO_PI * 0.1)
    assert h[1, 0] == pytest.approx(-2 * TWO_PI * 0.1)


def test_lab_modulation_couples_every_pair():
    lat = ModeLattice(2, 2)
    h = build_lab_hamiltonian(lat, [DriveTone(1, FSR, 0.3, 0.2)], t=0.11).entries
    amp = 2 * 0.2 * math.cos(TWO_PI * FSR * 0.11 + 0.3)
    for i in range(5):
        for j in range(5):
            if i != j:
                assert h[i, j] == pytest.approx(TWO_PI * (-1) ** (i + j) * amp)


def test_sqrt_omega_scaling():
    lat = ModeLattice(3, 3)
    coupler = QubitCoupler(4320.0, 0.36, "sqrt_omega")
    h = build_lab_hamiltonian(lat, (), coupler).entries
    expected = 0.36 * np.sqrt(lat.frequencies / 4320.0)
    assert np.allclose(h[0, 1:].real / TWO_PI, expected)
    assert np.allclose(h[1:, 0].real / TWO_PI, expected)


def test_qubit_detuning_on_diagonal():
    lat = ModeLattice(2, 2)
    coupler = QubitCoupler(omega_q=4320.0 + 2.5, kappa=0.36)
    h = build_lab_hamiltonian(lat, (), coupler).entries
    assert h[0, 0].real == pytest.approx(TWO_PI * 2.5)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        build_lab_hamiltonian(ModeLattice(), t=-1.0)


tone_st = st.builds(
    lambda order, freq, phase, g: DriveTone(order, freq, phase, g),
    st.integers(1, 3), st.floats(0.0, 30.0), st.floats(-7.0, 7.0), st.floats(0.0, 2.0))


@settings(max_examples=40, deadline=None)
@given(st.lists(tone_st, max_size=3), st.floats(0.0, 50.0), st.booleans(),
       st.integers(2, 9))
def test_lab_hermitian(tones, t, with_qubit, n):
    lat = ModeLattice(n // 2, n - n // 2)
    coupler = QubitCoupler(kappa=0.5) if with_qubit else None
    assert build_lab_hamiltonian(lat, tones, coupler, t).hermiticity_error() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(tone_st, min_size=1, max_size=2), st.floats(0.0, 10.0),
       st.integers(-1000, 1000))
def test_parity_shift_leaves_lab_matrix_unchanged(tones, t, shift):
    # (-1)^(a+b) is unchanged when both absolute indices move by the same integer
    base = ModeLattice(3, 3)
    moved = ModeLattice(3, 3, base_abs_index=592 + shift)
    h0 = build_lab_hamiltonian(base, tones, QubitCoupler(), t).entries
    h1 = build_lab_hamiltonian(moved, tones, QubitCoupler(), t).entries
    assert np.array_equal(h0, h1)


# -- rotating frame ----------------------------------------------------------

def test_rwa_nearest_neighbor_pi_phase():
    lat = ModeLattice(3, 3)
    h = build_rwa_hamiltonian(lat, [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi)]).entries
    assert np.allclose(np.diag(h), 0)
    assert np.allclose(np.diag(h, 1), TWO_PI * 0.5)
    assert np.allclose(np.diag(h, 2), 0)


def test_rwa_tilt_diagonal():
    lat = ModeLattice(3, 3)
    tones = [DriveTone.resonant(FSR, 1, -0.2, 0.5, math.pi)]
    h = build_rwa_hamiltonian(lat, tones, -0.2).entries
    assert np.allclose(np.diag(h).real, TWO_PI * 0.2 * lat.indices)
    assert np.allclose(np.diag(h, 1), TWO_PI * 0.5)


def test_rwa_two_tones_phases():
    lat = ModeLattice(3, 3)
    tones = [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi),
             DriveTone.resonant(FSR, 2, 0.0, 0.25, 0.5 * math.pi)]
    h = build_rwa_hamiltonian(lat, tones).entries / TWO_PI
    assert np.allclose(np.diag(h, 1), -0.5 * np.exp(1j * math.pi))
    assert np.allclose(np.diag(h, 2), 0.25 * np.exp(0.5j * math.pi))
    assert np.allclose(np.diag(h, -2), 0.25 * np.exp(-0.5j * math.pi))


def test_rwa_rejects_off_resonant_tone():
    with pytest.raises(ConfigError):
        build_rwa_hamiltonian(ModeLattice(), [DriveTone(1, 7.13, math.pi, 0.5)], 0.0)


def test_rwa_resolves_tone_from_frequency():
    # 7.13 MHz drive on a 7.33 MHz ladder is a -0.2 MHz tilt
    h = build_rwa_hamiltonian(ModeLattice(), [DriveTone(1, 7.13, math.pi, 0.5)], -0.2)
    assert h.detuning == -0.2


# -- flux and dispersion -----------------------------------------------------

@pytest.mark.parametrize("phi1, phi2, flux, canon", [
    (math.pi, math.pi, math.pi, math.pi),
    (math.pi, 0.5 * math.pi, 1.5 * math.pi, -0.5 * math.pi),
    (0.0, 0.0, 0.0, 0.0),
])
def test_effective_flux(phi1, phi2, flux, canon):
    assert effective_flux(phi1, phi2) == pytest.approx(flux)
    assert effective_flux(phi1, phi2, canonical=True) == pytest.approx(canon)


def test_canonical_phase_range():
    assert canonical_phase(-math.pi) == pytest.approx(math.pi)
    assert canonical_phase(3 * math.pi) == pytest.approx(math.pi)


def test_dispersion_values():
    tones = [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi)]
    assert dispersion_analytic(tones, 0.0) == pytest.approx(1.0)
    assert dispersion_analytic(tones, math.pi / 2) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("tones", [
    [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi)],
    [DriveTone.resonant(FSR, 2, 0.0, 0.5, math.pi)],
    [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi),
     DriveTone.resonant(FSR, 2, 0.0, 0.25, 0.5 * math.pi)],
])
def test_dispersion_matches_ring_diagonalization(tones):
    n = 64
    k = 2 * np.pi * np.arange(n) / n
    expected = np.sort(dispersion_analytic(tones, k))
    assert np.max(np.abs(ring_spectrum(tones, n) - expected)) < 1e-9


def test_flux_asymmetric_band_on_ring():
    tones = [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi),
             DriveTone.resonant(FSR, 2, 0.0, 0.25, 0.5 * math.pi)]
    k = 0.7
    assert abs(dispersion_analytic(tones, k) - dispersion_analytic(tones, -k)) > 0.1
    # the ring spectrum carries the same asymmetry: eigenvector at +k differs from -k
    lat = ModeLattice(0, 63)
    h = build_rwa_hamiltonian(lat, tones, ring=True).entries / TWO_PI
    j = 7
    wave = np.exp(1j * 2 * np.pi * j / 64 * np.arange(64))
    e_plus = np.vdot(wave, h @ wave).real / 64
    e_minus = np.vdot(wave.conj(), h @ wave.conj()).real / 64
    assert abs(e_plus - e_minus) > 0.1


@settings(max_examples=30, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi),
       st.integers(0, 31))
def test_gauge_transform_preserves_flux_and_ring_spectrum(phi1, phi2, j):
    n = 32
    theta = 2 * math.pi * j / n  # single-valued on the ring
    assert effective_flux(phi1 + theta, phi2 + 2 * theta) == pytest.approx(
        effective_flux(phi1, phi2), abs=1e-9)

    def tones(p1, p2):
        return [DriveTone.resonant(FSR, 1, 0.0, 0.5, p1),
                DriveTone.resonant(FSR, 2, 0.0, 0.25, p2)]

    a = ring_spectrum(tones(phi1, phi2), n)
    b = ring_spectrum(tones(phi1 + theta, phi2 + 2 * theta), n)
    assert np.max(np.abs(a - b)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.floats(-3.0, 3.0))
def test_gauge_open_chain_spectrum(phi1, phi2, theta):
    lat = ModeLattice(8, 8)

    def spectrum(p1, p2):
        t = [DriveTone.resonant(FSR, 1, 0.0, 0.5, p1),
             DriveTone.resonant(FSR, 2, 0.0, 0.25, p2)]
        return np.linalg.eigvalsh(build_rwa_hamiltonian(lat, t).entries)

    assert np.allclose(spectrum(phi1, phi2), spectrum(phi1 + theta, phi2 + 2 * theta),
                       atol=1e-9)


def test_group_velocity_matches_finite_difference():
    tones = [DriveTone.resonant(FSR, 1, 0.0, 0.5, math.pi),
             DriveTone.resonant(FSR, 2, 0.0, 0.25, 0.5 * math.pi)]
    k = np.linspace(-3, 3, 13)
    h = 1e-6
    fd = (dispersion_analytic(tones, k + h) - dispersion_analytic(tones, k - h)) / (2 * h)
    assert np.allclose(group_velocity(tones, k), fd, atol=1e-7)


def test_ring_too_short_for_order():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(DomainError):
            build_rwa_hamiltonian(ModeLattice(0, 1), [DriveTone.resonant(FSR, 2, 0.0, 0.5)],
                                  ring=True)
