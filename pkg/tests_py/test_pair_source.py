import math

import numpy as np
import pytest
from pydantic import ValidationError

import qfcsim.pair_source as ps
from qfcsim.cavity import ChannelPair, comb_grid
from qfcsim.errors import InvalidInputError
from qfcsim.jones import bell_target, state_fidelity

PUMP = 193.5e12
GRID = comb_grid(PUMP, 99e9, 22)


def _model(**overrides):
    values = dict(m=1, pgr=1e6, eta_s=0.1, eta_i=0.12, tau_w=1e-9)
    values.update(overrides)
    return ps.ChannelRateModel(**values)


def test_gaussian_envelope_halves_at_half_fwhm():
    env = ps.EnvelopeSpec(fwhm=3e12)
    for pair in GRID:
        value = ps.pgr_envelope(pair, PUMP, env)
        if pair.index >= 16:
            assert value < 0.5
        else:
            assert value > 0.5
    half = ChannelPair(1, PUMP + 1.5e12, PUMP - 1.5e12)
    for shape in ("gaussian", "sech2", "lorentzian"):
        assert ps.pgr_envelope(half, PUMP, ps.EnvelopeSpec(shape=shape)) == pytest.approx(0.5)


def test_envelope_is_one_at_the_pump():
    center = ChannelPair(1, PUMP, PUMP)
    assert ps.pgr_envelope(center, PUMP, ps.EnvelopeSpec()) == 1.0


def test_with_envelope_only_scales_pgr():
    model = _model(raman_s=10.0, dark_i=5.0)
    scaled = ps.with_envelope(model, GRID[7], PUMP, ps.EnvelopeSpec())
    assert scaled.pgr == pytest.approx(model.pgr * ps.pgr_envelope(GRID[7], PUMP, ps.EnvelopeSpec()))
    assert scaled.raman_s == 10.0
    assert scaled.dark_i == 5.0
    assert model.pgr == 1e6


def test_singles_and_coincidences_values():
    model = _model(raman_s=1000.0, raman_i=1200.0, dark_s=100.0, dark_i=50.0)
    assert ps.expected_singles(model, "signal", 2.0) == pytest.approx(0.1 * 1e6 * 4 + 2000 + 100)
    assert ps.expected_singles(model, "idler", 2.0) == pytest.approx(0.12 * 1e6 * 4 + 2400 + 50)
    rates = ps.expected_coincidences(model, 2.0)
    assert rates.true == pytest.approx(0.1 * 0.12 * 1e6 * 4)
    assert rates.accidental == pytest.approx(402100 * 482450 * 1e-9)
    assert rates.total == pytest.approx(rates.true + rates.accidental)


def test_zero_power_leaves_dark_counts_only():
    model = _model(dark_s=100.0, dark_i=80.0)
    assert ps.expected_singles(model, "signal", 0.0) == 100.0
    assert ps.expected_coincidences(model, 0.0).true == 0.0
    with pytest.raises(InvalidInputError):
        ps.expected_singles(model, "signal", -1.0)
    with pytest.raises(InvalidInputError):
        ps.expected_singles(model, "pump", 1.0)


def test_singles_product_over_coincidences_recovers_pair_rate():
    model = _model()
    for power in (0.5, 1.0, 3.0):
        n_s = ps.expected_singles(model, "signal", power)
        n_i = ps.expected_singles(model, "idler", power)
        n_c = ps.expected_coincidences(model, power).true
        assert n_s * n_i / n_c == pytest.approx(model.pgr * power**2)


def test_car_falls_as_one_over_power_when_noise_dominates():
    # η·R = 3.9e3 and a linear term of 8.12e3 per mW on both arms.
    model = _model(pgr=3.9e4, eta_s=0.1, eta_i=0.1, raman_s=8.12e3, raman_i=8.12e3)
    powers = np.linspace(1.8, 2.4, 7)
    cars = [ps.car_expected(model, p) for p in powers]
    slope = np.polyfit(np.log(powers), np.log(cars), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.1)


def test_car_without_accidentals_is_infinite():
    model = _model(pgr=0.0)
    assert ps.car_expected(model, 1.0) == math.inf


def test_multiphoton_fraction_and_stokes_raman():
    assert ps.multiphoton_fraction(1e6, 1.0, 1e-9) == pytest.approx(1 / 1.001)
    assert ps.multiphoton_fraction(1e6, 0.0, 1e-9) == 1.0
    assert ps.stokes_raman(1140.0) == pytest.approx(1320.0)


def test_noisy_state_fidelity():
    target = bell_target(0.3)
    assert state_fidelity(ps.noisy_state(0.3, 0.8), target) == pytest.approx(0.85, abs=1e-9)
    assert state_fidelity(ps.noisy_state(0.3, 0.9), target) == pytest.approx(0.925, abs=1e-9)
    assert state_fidelity(ps.ideal_state(0.3), target) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        ps.noisy_state(0.0, 1.2)


def test_rate_model_validation():
    with pytest.raises(ValidationError):
        _model(eta_s=1.5)
    with pytest.raises(ValidationError):
        _model(tau_w=0.0)
    with pytest.raises(ValidationError):
        _model(m=0)
    with pytest.raises(ValidationError):
        _model(extra_field=1)


def test_pair_rate_identity_on_random_triples():
    rng = np.random.default_rng(0)
    for pgr, eta_s, eta_i in zip(rng.uniform(1e3, 1e7, 10_000), rng.uniform(0.01, 1, 10_000), rng.uniform(0.01, 1, 10_000)):
        model = ps.ChannelRateModel(m=1, pgr=pgr, eta_s=eta_s, eta_i=eta_i, tau_w=1e-9)
        n_s = ps.expected_singles(model, "signal", 1.0)
        n_i = ps.expected_singles(model, "idler", 1.0)
        n_c = ps.expected_coincidences(model, 1.0).true
        assert n_s * n_i / n_c == pytest.approx(pgr, rel=1e-12)


def test_signal_fraction_of_coincidence_rates():
    rates = ps.CoincidenceRates(true=900.0, accidental=100.0)
    assert rates.signal_fraction == pytest.approx(0.9)
    assert ps.CoincidenceRates(0.0, 0.0).signal_fraction == 1.0
    model = ps.ChannelRateModel(m=1, pgr=1e5, eta_s=0.1, eta_i=0.1, dark_s=1e3, dark_i=1e3, tau_w=1e-6)
    expected = ps.expected_coincidences(model, 1.0)
    car = ps.car_expected(model, 1.0)
    assert expected.signal_fraction == pytest.approx(car / (1 + car))
