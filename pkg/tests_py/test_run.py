import json

import pytest

import qfcsim.run as run
from qfcsim.report import read_csv


def test_jsi_command_writes_both_formats(small_config, tmp_path, capsys):
    out = tmp_path / "out"
    code = run.main(["jsi", "--config", str(small_config), "--out", str(out)])
    assert code == run.EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["fig4a_jsi.csv", "fig4a_jsi.json", "summary.json"]
    assert "3 files written" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["root_seed"] == 20240101
    assert "jsi" in summary["stages"]


def test_same_seed_gives_identical_files(small_config, tmp_path):
    for name in ("a", "b"):
        assert run.main(["power-fit", "--config", str(small_config), "--out", str(tmp_path / name)]) == 0
    for path in (tmp_path / "a").iterdir():
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


@pytest.mark.slow
def test_full_bundled_run_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run.main(["all", "--config", "paper-defaults", "--out", str(tmp_path / name), "--workers", "4"]) == 0
    first = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert first == sorted(p.name for p in (tmp_path / "b").iterdir())
    assert len(first) == 2 * 14 + 1
    for name in first:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_changes_numbers_and_header(small_config, tmp_path):
    run.main(["jsi", "--config", str(small_config), "--out", str(tmp_path / "a"), "--format", "csv"])
    run.main(["jsi", "--config", str(small_config), "--out", str(tmp_path / "b"), "--format", "csv", "--seed", "5"])
    meta_a, table_a = read_csv(tmp_path / "a" / "fig4a_jsi.csv")
    meta_b, table_b = read_csv(tmp_path / "b" / "fig4a_jsi.csv")
    assert meta_b.root_seed == 5
    assert meta_a.scenario_hash != meta_b.scenario_hash
    assert table_a.rows != table_b.rows


def test_csv_and_json_agree(small_config, tmp_path):
    out = tmp_path / "out"
    assert run.main(["power-fit", "--config", str(small_config), "--out", str(out)]) == 0
    meta, csv_table = read_csv(out / "fig3_power_terms.csv")
    payload = json.loads((out / "fig3_power_terms.json").read_text(encoding="utf-8"))
    assert payload["scenario_hash"] == meta.scenario_hash
    assert payload["columns"] == csv_table.columns
    assert payload["rows"] == csv_table.rows


def test_invalid_scenario_exits_with_config_error(small_payload, tmp_path, capsys):
    small_payload["channels"] = []
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(small_payload), encoding="utf-8")
    assert run.main(["jsi", "--config", str(path), "--out", str(tmp_path / "out")]) == run.EXIT_CONFIG
    assert "channels:" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_missing_scenario_exits_with_config_error(tmp_path):
    assert run.main(["jsi", "--config", str(tmp_path / "absent.json")]) == run.EXIT_CONFIG


def test_stage_failure_exits_with_stage_error(small_payload, tmp_path, capsys):
    small_payload["metrics"]["histogram_peak"] = 1e-3
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(small_payload), encoding="utf-8")
    code = run.main(["metrics", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == run.EXIT_STAGE
    assert "Stage metrics failed" in capsys.readouterr().err


def test_output_directory_precedence(small_payload, tmp_path, monkeypatch):
    monkeypatch.setenv("QFC_OUTPUT_DIR", str(tmp_path / "from_env"))
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(small_payload), encoding="utf-8")
    assert run.main(["jsi", "--config", str(path)]) == 0
    assert (tmp_path / "from_env" / "fig4a_jsi.csv").exists()

    small_payload["outputs"] = str(tmp_path / "from_scenario")
    path.write_text(json.dumps(small_payload), encoding="utf-8")
    assert run.main(["jsi", "--config", str(path)]) == 0
    assert (tmp_path / "from_scenario" / "fig4a_jsi.csv").exists()

    assert run.main(["jsi", "--config", str(path), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "fig4a_jsi.csv").exists()


def test_selected_stages():
    assert run.selected_stages("all") == ["spectrum", "hysteresis", "lock", "tomo", "power-fit", "jsi", "metrics"]
    assert run.selected_stages("lock") == ["lock"]


def test_unwritable_output_exits_with_io_error(small_config, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    assert run.run_scenario(small_config, "jsi", out=str(blocker / "sub")) == run.EXIT_IO


def test_run_scenario_accepts_bundled_names(tmp_path, capsys):
    assert run.run_scenario("paper-defaults", "jsi", out=str(tmp_path), fmt="json") == run.EXIT_OK
    assert (tmp_path / "fig4a_jsi.json").exists()
    assert not (tmp_path / "fig4a_jsi.csv").exists()
