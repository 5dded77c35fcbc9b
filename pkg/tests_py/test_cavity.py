import math

import numpy as np
import pytest

import qfcsim.cavity as cavity
from qfcsim.errors import FitError, InvalidInputError, InvalidParameterError


def test_transmission_at_center_and_half_width():
    assert cavity.transmission(0.0, 190.41e6, 0.05) == pytest.approx(0.05)
    half = cavity.transmission(95.205e6, 190.41e6, 0.05)
    assert half == pytest.approx(1 - 0.95 / 2)
    far = cavity.transmission(100 * 190.41e6, 190.41e6, 0.05)
    assert far > 0.9999


def test_transmission_is_vectorised_and_validates():
    values = cavity.transmission(np.array([-1e9, 0.0, 1e9]), 190.41e6, 0.02)
    assert values.shape == (3,)
    assert values[0] == pytest.approx(values[2])
    with pytest.raises(InvalidParameterError):
        cavity.transmission(0.0, 0.0, 0.05)
    with pytest.raises(InvalidParameterError):
        cavity.transmission(0.0, 1e8, 1.0)


def test_extinction_db():
    assert cavity.extinction_db(0.05) == pytest.approx(13.0103, abs=1e-3)
    assert cavity.extinction_db(1.0) == 0.0
    with pytest.raises(InvalidParameterError):
        cavity.extinction_db(0.0)


def test_comb_grid_symmetric_pairs():
    pairs = cavity.comb_grid(193.5e12, 99e9, 22)
    assert len(pairs) == 22
    assert pairs[0].signal_frequency == pytest.approx(193.599e12)
    assert pairs[0].idler_frequency == pytest.approx(193.401e12)
    assert all(p.center == pytest.approx(193.5e12) for p in pairs)
    eighth = pairs[7]
    assert eighth.signal_frequency == pytest.approx(194.292e12)
    assert eighth.idler_frequency == pytest.approx(192.708e12)


def test_comb_grid_edges():
    assert cavity.comb_grid(193.5e12, 99e9, 0) == []
    with pytest.raises(InvalidParameterError):
        cavity.comb_grid(193.5e12, 99e9, -1)
    with pytest.raises(InvalidParameterError):
        cavity.ChannelPair(0, 1.0, 1.0)


def test_thermal_shift_and_heater_power():
    spec = cavity.RingSpec()
    assert cavity.thermal_shift(1.0, 0.0, spec) == pytest.approx(-3.01e9)
    assert cavity.thermal_shift(0.0, 2.0, spec) == pytest.approx(-3.64e9)
    # 1 mA through 2050 Ω dissipates 2.05 mW
    assert cavity.heater_power_mw(1.0, spec) == pytest.approx(2.05)


def test_ring_spec_properties_and_overrides():
    spec = cavity.RingSpec(resonance_fwhms={3: 250e6})
    assert spec.resonance_frequency == spec.pump_frequency
    assert spec.q_factor == pytest.approx(193.5e12 / 190.41e6)
    assert spec.fwhm_for(3) == 250e6
    assert spec.fwhm_for(4) == spec.fwhm
    comb = cavity.resonance_comb(spec, 5, 193.3e12)
    assert comb[3][1] == 250e6
    assert cavity.estimate_fsr([c for c, _ in comb]) == pytest.approx(spec.fsr)
    with pytest.raises(ValueError):
        cavity.RingSpec(resonance_fwhms={1: -1.0})


def test_wavelength_span_of_sixteen_pairs():
    span = cavity.wavelength_span(193.5e12 - 1.584e12, 193.5e12 + 1.584e12)
    assert span == pytest.approx(25.4e-9, rel=0.01)


def test_fit_recovers_noiseless_dip():
    samples = cavity.synthetic_spectrum(193.5e12, 190.41e6, 0.02)
    fit = cavity.fit_lorentzian(samples)
    assert fit.f0 == pytest.approx(193.5e12, abs=1e3)
    assert fit.fwhm == pytest.approx(190.41e6, rel=1e-6)
    assert fit.min_transmission == pytest.approx(0.02, abs=1e-6)
    assert fit.q_factor == pytest.approx(1.016e6, rel=1e-3)


def test_fit_with_noise_stays_close():
    samples = cavity.synthetic_spectrum(193.5e12, 190.41e6, 0.05, noise=0.005, seed=7)
    fit = cavity.fit_lorentzian(samples)
    assert fit.fwhm == pytest.approx(190.41e6, rel=0.02)
    assert abs(fit.f0 - 193.5e12) < 0.02 * 190.41e6


def test_fit_rejects_flat_and_short_input():
    flat = [(193.5e12 + k * 1e6, 1.0) for k in range(50)]
    with pytest.raises(FitError):
        cavity.fit_lorentzian(flat)
    with pytest.raises(InvalidInputError):
        cavity.fit_lorentzian(flat[:3])


def test_quality_factor_of_default_linewidth():
    assert math.isclose(cavity.RingSpec().q_factor, 1.016e6, rel_tol=1e-3)


def test_fit_tolerance_over_noise_realizations():
    # 1% additive noise: f0 within fwhm/10 and fwhm within 5% for every seed.
    fwhm = 190.41e6
    for seed in range(100):
        samples = cavity.synthetic_spectrum(193.5e12, fwhm, 0.05, noise=0.01, seed=seed)
        fit = cavity.fit_lorentzian(samples)
        assert abs(fit.f0 - 193.5e12) < fwhm / 10
        assert fit.fwhm == pytest.approx(fwhm, rel=0.05)
