import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from rydpol.errors import TruncationOverflow
from rydpol.lineshape import (ModeSpec, SpectrumDataset, SpectrumModel, VoigtParams,
                              centroid_closed_form, fock_components, joint_lines, line_spread,
                              simulate_spectrum, spectrum, spectrum_centroid, spectrum_shape,
                              stick_spectrum, voigt_profile)
from rydpol.phonon_stats import PhononDistribution as PD

MHZ = 2 * math.pi * 1e6
V = VoigtParams(0.5 * MHZ, 2.0 * MHZ)


def test_voigt_is_normalised_and_matches_faddeeva():
    val, _ = integrate.quad(lambda u: MHZ * voigt_profile(u * MHZ, 0.0, V), -np.inf, np.inf,
                            limit=500)
    assert val == pytest.approx(1.0, rel=1e-7)
    # Voigt = Re w(z) / (sigma sqrt(2 pi)), z = (x + i gamma_hwhm) / (sigma sqrt 2)
    x = np.linspace(-10, 10, 7) * MHZ
    z = (x + 1j * 0.5 * V.gamma_l) / (V.sigma * math.sqrt(2))
    ref = special.wofz(z).real / (V.sigma * math.sqrt(2 * math.pi))
    np.testing.assert_allclose(voigt_profile(x, 0.0, V), ref, rtol=1e-12)


def test_voigt_limits():
    g = VoigtParams(MHZ, 0.0)
    x = np.array([0.0, MHZ])
    np.testing.assert_allclose(voigt_profile(x, 0, g),
                               np.exp(-x**2 / (2 * MHZ**2)) / (MHZ * math.sqrt(2 * math.pi)))
    lor = VoigtParams(0.0, 2 * MHZ)
    np.testing.assert_allclose(voigt_profile(x, 0, lor), MHZ / math.pi / (x**2 + MHZ**2))
    with pytest.raises(ValueError):
        VoigtParams(0.0, 0.0)


def test_fwhm_approximation():
    f = V.fwhm
    half = voigt_profile(np.array([0.5 * f]), 0, V)[0] / V.peak
    assert half == pytest.approx(0.5, abs=5e-4)


def test_ground_state_is_single_voigt():
    grid = np.linspace(-10, 10, 201) * MHZ
    m = SpectrumModel(0.3 * MHZ, [ModeSpec(-0.1 * MHZ, PD.thermal(0))], V, 0.6, 0.05)
    ref = 0.05 + 0.6 * voigt_profile(grid, 0.3 * MHZ, V) / V.peak
    np.testing.assert_allclose(spectrum(m, grid), ref, rtol=1e-12)
    assert spectrum(m, np.array([0.3 * MHZ]))[0] == pytest.approx(0.65)


def test_brute_force_superposition():
    grid = np.linspace(-8, 4, 61) * MHZ
    d = (-0.0794 * MHZ, -0.0962 * MHZ)
    modes = [ModeSpec(d[0], PD.thermal(0.4)), ModeSpec(d[1], PD.coherent(3.0))]
    m = SpectrumModel(0.0, modes, V, tail_mass=1e-10)
    total = np.zeros_like(grid)
    for nx in range(60):
        for ny in range(60):
            w = PD.thermal(0.4).pmf(nx) * PD.coherent(3.0).pmf(ny)
            total += w * voigt_profile(grid, nx * d[0] + ny * d[1], V)
    np.testing.assert_allclose(spectrum(m, grid), total / V.peak, rtol=1e-8, atol=1e-10)


def test_fast_table_close_to_exact():
    grid = np.linspace(-12, 6, 500) * MHZ
    pos = np.array([-0.37, 0.0, 1.2]) * MHZ
    w = np.array([0.2, 0.5, 0.3])
    exact = spectrum_shape(grid, pos, w, V)
    fast = spectrum_shape(grid, pos, w, V, fast=True)
    np.testing.assert_allclose(fast, exact, atol=1e-6)


def test_joint_lines_pruning_and_overflow():
    modes = [ModeSpec(-1.0, PD.coherent(10.0)), ModeSpec(-1.0, PD.coherent(10.0))]
    w, occ = joint_lines(modes, 1e-6)
    assert w.sum() > 1 - 1e-5
    assert occ.shape == (len(w), 2)
    with pytest.raises(TruncationOverflow):
        joint_lines(modes, 1e-6, max_terms=100)


def test_fock_components_sum_to_spectrum():
    grid = np.linspace(-5, 5, 41) * MHZ
    m = SpectrumModel(0.0, [ModeSpec(-0.5 * MHZ, PD.thermal(0.7))], V, 0.8)
    occ, w, lines = fock_components(m, grid)
    np.testing.assert_allclose(lines.sum(axis=0), spectrum(m, grid), rtol=1e-12)


def test_stick_spectrum_positions():
    m = SpectrumModel(1.0, [ModeSpec(-2.0, PD.fock(3))], V)
    pos, w = stick_spectrum(m)
    np.testing.assert_array_equal(pos, [-5.0])
    np.testing.assert_array_equal(w, [1.0])


@pytest.mark.parametrize("dists", [
    (PD.thermal(0.4),), (PD.thermal(10.0),), (PD.coherent(12.0),),
    (PD.thermal(0.4), PD.coherent(6.0)), (PD.thermal(2.0), PD.thermal(5.0), PD.coherent(3.0)),
])
def test_centroid_identity(dists):
    shifts = (-0.0794 * MHZ, -0.0962 * MHZ, -0.000217 * MHZ)
    m = SpectrumModel(0.25 * MHZ, [ModeSpec(s, d) for s, d in zip(shifts, dists)], V)
    assert spectrum_centroid(m) == pytest.approx(centroid_closed_form(m), rel=1e-10)


def test_centroid_is_first_moment_of_curve():
    # direct numerical first moment of the baseline-free curve (wide grid for Lorentz tails)
    v = VoigtParams(0.5 * MHZ, 0.0)
    m = SpectrumModel(0.0, [ModeSpec(-0.3 * MHZ, PD.coherent(2.0))], v)
    grid = np.linspace(-30, 30, 60001) * MHZ
    y = spectrum(m, grid)
    c = np.trapezoid(grid * y, grid) / np.trapezoid(y, grid)
    assert c == pytest.approx(spectrum_centroid(m), rel=1e-6)


def test_line_spread():
    m = SpectrumModel(0.0, [ModeSpec(-2.0, PD.coherent(3.0))], V)
    pos, w = stick_spectrum(m)
    var = w @ (pos - w @ pos) ** 2
    # truncated support (tail 1e-6) against the exact variance
    assert line_spread(m) == pytest.approx(math.sqrt(var), rel=1e-4)


def test_model_validation():
    with pytest.raises(ValueError):
        SpectrumModel(0.0, [], V, amplitude=0.0)
    with pytest.raises(ValueError):
        SpectrumModel(0.0, [], V, amplitude=0.8, baseline=0.3)
    with pytest.raises(ValueError):
        ModeSpec(float("nan"), PD.thermal(0))


def test_simulation_is_seeded_and_binomial():
    grid = np.linspace(-5, 5, 11) * MHZ
    m = SpectrumModel(0.0, [ModeSpec(-0.1 * MHZ, PD.thermal(0.4))], V, 0.6)
    a = simulate_spectrum(m, grid, 100, seed=7)
    b = simulate_spectrum(m, grid, 100, seed=7)
    np.testing.assert_array_equal(a.probabilities, b.probabilities)
    np.testing.assert_allclose(a.probabilities * 100, np.round(a.probabilities * 100))
    exact = simulate_spectrum(m, grid, 100, seed=0, noiseless=True)
    np.testing.assert_allclose(exact.probabilities, spectrum(m, grid))


def test_dataset_validation():
    with pytest.raises(ValueError):
        SpectrumDataset([0.0, 1.0], [0.5], 10)
    with pytest.raises(ValueError):
        SpectrumDataset([0.0], [1.5], 10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.0, 12.0), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_centroid_identity_property(nbar, alpha, dx, dy):
    m = SpectrumModel(0.0, [ModeSpec(dx * MHZ, PD.thermal(nbar)),
                            ModeSpec(dy * MHZ, PD.coherent(alpha))], V)
    ref = centroid_closed_form(m)
    assert spectrum_centroid(m) == pytest.approx(ref, rel=1e-9, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.0, 0.04))
def test_amplitude_and_baseline_bounds(amp, base):
    grid = np.linspace(-10, 10, 81) * MHZ
    m = SpectrumModel(0.0, [ModeSpec(-0.1 * MHZ, PD.coherent(4.0))], V, amp, base)
    y = spectrum(m, grid)
    assert np.all(y >= base - 1e-15)
    assert np.all(y <= base + amp + 1e-12)
