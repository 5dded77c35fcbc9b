import math

import numpy as np
import pytest

import qfcsim.jones as jones
from qfcsim.errors import InvalidInputError, InvalidStateError

PSI_PLUS = jones.bell_target(0.0)


def _same_up_to_phase(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return abs(abs(np.vdot(a, b)) - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-12


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def test_waveplate_anchors():
    h, v = jones.POLARIZATIONS["H"], jones.POLARIZATIONS["V"]
    assert _same_up_to_phase(jones.waveplate("half", math.pi / 4) @ h, v)
    hwp0 = jones.waveplate("half", 0.0)
    assert np.allclose(hwp0 / hwp0[0, 0], np.diag([1, -1]))
    circular = np.array([1, 1j]) / math.sqrt(2)
    assert _same_up_to_phase(jones.waveplate("quarter", math.pi / 4) @ h, circular)


def test_waveplates_are_unitary():
    for kind in ("half", "quarter"):
        for angle in np.linspace(0, math.pi, 37):
            j = jones.waveplate(kind, angle)
            assert np.max(np.abs(j.conj().T @ j - np.eye(2))) < 1e-12
    with pytest.raises(InvalidInputError):
        jones.waveplate("full", 0.0)


def test_compensator_phase_values():
    assert abs(_wrap(jones.compensator_phase(math.pi, 0.0))) < 1e-12
    assert abs(_wrap(jones.compensator_phase(0.0, math.pi / 4))) < 1e-12
    assert jones.compensator_phase(0.3, 0.2) == pytest.approx(0.8 + 0.3 - math.pi, abs=1e-12)


def test_compensator_phase_law_on_grid():
    for theta in np.linspace(-math.pi, math.pi, 100):
        for phi in np.linspace(0, math.pi, 100):
            residual = jones.compensator_phase(theta, phi) - (4 * phi + theta - math.pi)
            assert abs(_wrap(residual)) < 1e-10


def test_compensation_angle_cancels_random_phases():
    assert jones.compensation_angle(0.0) == pytest.approx(math.pi / 4)
    assert jones.compensation_angle(math.pi) == pytest.approx(0.0)
    rng = np.random.default_rng(3)
    for theta in rng.uniform(-math.pi, math.pi, 1000):
        phi = jones.compensation_angle(theta)
        assert 0 <= phi < math.pi / 2
        assert abs(_wrap(jones.compensator_phase(theta, phi))) < 1e-9


def test_sagnac_state_diagonal_pump():
    d = jones.POLARIZATIONS["D"]
    assert jones.born_probability(jones.sagnac_state(d, 0.0), "D", "D") == pytest.approx(0.5)
    for theta in np.linspace(0, 2 * math.pi, 13):
        rho = jones.sagnac_state(d, theta)
        overlap = jones.state_fidelity(rho, PSI_PLUS)
        assert overlap == pytest.approx((1 + math.cos(theta)) / 2, abs=1e-9)
    assert jones.state_fidelity(jones.sagnac_state(d, math.pi), PSI_PLUS) == pytest.approx(0.0, abs=1e-9)


def test_sagnac_state_single_path_is_product():
    rho = jones.sagnac_state(jones.POLARIZATIONS["H"], 0.7)
    assert jones.concurrence(rho) == pytest.approx(0.0, abs=1e-9)
    assert rho.purity == pytest.approx(1.0)
    assert rho.element("VV", "VV") == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        jones.sagnac_state([0, 0], 0.0)


def test_compensated_state_recovers_bell_state():
    for theta in (0.0, 0.7, 2.5, -1.2):
        rho = jones.compensated_state(theta, jones.compensation_angle(theta))
        assert jones.state_fidelity(rho, PSI_PLUS) == pytest.approx(1.0, abs=1e-9)


def test_projectors_form_unbiased_bases():
    for a, b in jones.BASES.values():
        total = jones.projector(a) + jones.projector(b)
        assert np.allclose(total, np.eye(2))
    d, a = jones.POLARIZATIONS["D"], jones.POLARIZATIONS["A"]
    assert abs(np.vdot(d, a)) < 1e-15
    assert abs(np.vdot(jones.POLARIZATIONS["H"], d)) ** 2 == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        jones.projector("X")


def test_born_probabilities():
    assert jones.born_probability(PSI_PLUS, "D", "D") == pytest.approx(0.5)
    assert jones.born_probability(PSI_PLUS, "D", "A") == pytest.approx(0.0, abs=1e-15)
    mixed = jones.TwoQubitState.maximally_mixed()
    assert jones.born_probability(mixed, "R", "H") == pytest.approx(0.25)
    rng = np.random.default_rng(0)
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = jones.TwoQubitState.from_vector(psi)
    for setting in jones.measurement_settings():
        total = sum(jones.born_probability(rho, s, i) for s, i in setting.outcomes())
        assert total == pytest.approx(1.0, abs=1e-12)


def test_born_probability_rejects_invalid_matrix():
    with pytest.raises(InvalidStateError):
        jones.born_probability(np.eye(4), "H", "H")


def test_two_qubit_state_validation():
    with pytest.raises(InvalidStateError):
        jones.TwoQubitState(np.eye(3) / 3)
    with pytest.raises(InvalidStateError):
        jones.TwoQubitState(np.diag([1.5, -0.5, 0, 0]))
    bad = np.eye(4, dtype=complex) / 4
    bad[0, 1] = 0.1
    with pytest.raises(InvalidStateError):
        jones.TwoQubitState(bad)


def test_state_json_round_trip():
    rho = jones.compensated_state(0.4, 0.1)
    values = rho.to_json_list()
    assert len(values) == 16
    again = jones.TwoQubitState.from_json_list(values)
    assert np.allclose(again.matrix, rho.matrix)
    with pytest.raises(InvalidStateError):
        jones.TwoQubitState.from_json_list(values[:4])


def test_measurement_settings_order_and_labels():
    settings = jones.measurement_settings()
    assert len(settings) == 9
    assert settings[1].label == "HV×DA"
    assert settings[4].outcome_labels() == ["DD", "DA", "AD", "AA"]
    with pytest.raises(InvalidInputError):
        jones.MeasurementSetting("HV", "XY")


def test_entanglement_metrics():
    assert jones.concurrence(PSI_PLUS) == pytest.approx(1.0)
    assert jones.purity(PSI_PLUS) == pytest.approx(1.0)
    mixed = jones.TwoQubitState.maximally_mixed()
    assert jones.concurrence(mixed) == pytest.approx(0.0, abs=1e-12)
    assert jones.purity(mixed) == pytest.approx(0.25)
    assert jones.state_fidelity(mixed, PSI_PLUS) == pytest.approx(0.25)


def test_fidelity_with_rank_deficient_argument_is_symmetric():
    psi = jones.bell_target(0.0)
    werner = jones.TwoQubitState(0.8 * psi.matrix + 0.2 * np.eye(4) / 4)
    assert jones.state_fidelity(psi, werner) == pytest.approx(0.85, abs=1e-12)
    assert jones.state_fidelity(werner, psi) == pytest.approx(0.85, abs=1e-12)
    root = jones.psd_sqrt(psi.matrix)
    assert np.allclose(root @ root, psi.matrix, atol=1e-12)
