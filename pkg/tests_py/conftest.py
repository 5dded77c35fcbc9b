import json

import pytest

from qfcsim.scenario import BUNDLED_DIR


def _small_payload():
    payload = json.loads((BUNDLED_DIR / "paper-defaults.json").read_text(encoding="utf-8"))
    payload["name"] = "small"
    payload["channels"] = payload["channels"][:2]
    payload["powers"] = [0.6, 3.0]
    payload["spectrum"].update({"points": 101})
    payload["hysteresis"].update({"points": 41})
    payload["lock"].update({"duration": 2.0})
    payload["tomo"].update(
        {
            "density_channel": 1,
            "power_sweep_channel": 1,
            "power_sweep_time": 500.0,
            "visibility_points": 5,
            "stability_repeats": 5,
        }
    )
    payload["jsi"].update({"integration_time": 10.0})
    payload["metrics"].update({"car_channel": 1, "car_points": 4, "car_time": 1.0, "min_accidentals": 50.0})
    return payload


@pytest.fixture
def small_payload():
    return _small_payload()


@pytest.fixture
def small_config(tmp_path, small_payload):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_payload), encoding="utf-8")
    return path
