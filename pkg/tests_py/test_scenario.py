import json

import pytest
from pydantic import ValidationError

import qfcsim.scenario as scenario
from qfcsim.errors import ScenarioError
from qfcsim.run import format_validation_error


def _payload():
    return json.loads((scenario.BUNDLED_DIR / "paper-defaults.json").read_text(encoding="utf-8"))


def test_bundled_scenario_loads():
    sc = scenario.load_scenario("paper-defaults")
    assert sc.name == "paper-defaults"
    assert len(sc.channels) == 22
    assert sc.channel(8).tau_w == 5e-08
    pair = sc.channel_pair(8)
    assert pair.signal_frequency == pytest.approx(194.292e12)
    assert pair.idler_frequency == pytest.approx(192.708e12)
    with pytest.raises(KeyError):
        sc.channel(99)


def test_scenario_hash_is_stable_and_seed_sensitive():
    first = scenario.load_scenario("paper-defaults")
    again = scenario.load_scenario("paper-defaults")
    assert scenario.scenario_hash(first) == scenario.scenario_hash(again)
    assert len(scenario.scenario_hash(first)) == 16
    reseeded = scenario.with_seed(first, 7)
    assert reseeded.root_seed == 7
    assert scenario.scenario_hash(reseeded) != scenario.scenario_hash(first)


def test_load_from_path(tmp_path):
    path = tmp_path / "custom.json"
    payload = _payload()
    payload["name"] = "custom"
    path.write_text(json.dumps(payload), encoding="utf-8")
    assert scenario.load_scenario(path).name == "custom"
    assert scenario.load_scenario(str(path)).name == "custom"


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ScenarioError):
        scenario.load_scenario(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        scenario.load_scenario(bad)


def test_empty_channel_list_names_the_field():
    payload = _payload()
    payload["channels"] = []
    with pytest.raises(ValidationError) as info:
        scenario.Scenario.model_validate(payload)
    lines = format_validation_error(info.value)
    assert any(line.startswith("channels:") for line in lines)


def test_efficiency_above_one_is_rejected():
    payload = _payload()
    payload["channels"][0]["eta_s"] = 1.2
    with pytest.raises(ValidationError) as info:
        scenario.Scenario.model_validate(payload)
    assert any(line.startswith("channels.0.eta_s:") for line in format_validation_error(info.value))


def test_setpoint_outside_unit_interval_is_rejected():
    payload = _payload()
    payload["controller"]["setpoint_transmission"] = 1.5
    with pytest.raises(ValidationError) as info:
        scenario.Scenario.model_validate(payload)
    assert any("setpoint_transmission" in line for line in format_validation_error(info.value))


def test_cross_field_checks():
    payload = _payload()
    payload["channels"][1]["m"] = 1
    with pytest.raises(ValidationError, match="unique"):
        scenario.Scenario.model_validate(payload)

    payload = _payload()
    payload["metrics"]["car_channel"] = 40
    with pytest.raises(ValidationError, match="car_channel"):
        scenario.Scenario.model_validate(payload)

    payload = _payload()
    payload["powers"] = [1.0, -0.5]
    with pytest.raises(ValidationError):
        scenario.Scenario.model_validate(payload)

    payload = _payload()
    payload["surprise"] = True
    with pytest.raises(ValidationError):
        scenario.Scenario.model_validate(payload)


def test_defaults_fill_missing_stage_blocks():
    payload = _payload()
    for key in ("spectrum", "hysteresis", "lock", "jsi", "budget"):
        payload.pop(key, None)
    sc = scenario.Scenario.model_validate(payload)
    assert sc.hysteresis.powers == [0.015, 2.773]
    assert sc.lock.duration == 100.0
    assert len(sc.power_fit.powers) == 10


def test_lock_drift_table():
    payload = _payload()
    payload["lock"]["drift_table"] = [[0.0, 0.0], [50.0, 1e8], [100.0, 0.0]]
    sc = scenario.Scenario.model_validate(payload)
    assert sc.lock.drift_table[1] == (50.0, 1e8)
    payload["lock"]["drift_table"] = [[1.0, 0.0], [1.0, 5.0]]
    with pytest.raises(ValidationError) as info:
        scenario.Scenario.model_validate(payload)
    assert any(line.startswith("lock.drift_table") for line in format_validation_error(info.value))
