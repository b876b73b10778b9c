import json
import math
import xml.etree.ElementTree as ET

import pytest

from shearlab import cli
from shearlab.reports import ConfigError, parse_config, sha256


def _manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_report_on_empty_directory(tmp_path, capsys):
    assert cli.main(["report", "--out", str(tmp_path)]) == 2
    assert "no runs found" in capsys.readouterr().err


def test_unknown_config_key_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"M": 1, "gamma": 0.1, "colour": "blue"}))
    assert cli.main(["evolve-mode", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_unknown_section_key_and_bad_set(tmp_path):
    with pytest.raises(ConfigError):
        parse_config({"M": 1, "gamma": 0.1, "mode": {"speed": 3}})
    assert cli.main(["evolve-mode", "--preset", "couette", "--set", "T_final=3", "--out", str(tmp_path)]) == 2


def test_unknown_preset_rejected_by_argparse():
    with pytest.raises(SystemExit) as exc:
        cli.main(["evolve-mode", "--preset", "nope"])
    assert exc.value.code == 2


def test_module_error_writes_error_json(tmp_path, capsys):
    out = tmp_path / "nl"
    code = cli.main(["nonlinear", "--M", "10", "--gamma", "0.1", "--viscous", "--set", "nonlinear.N_y=256",
                     "--set", "nonlinear.T_final=1000", "--out", str(out)])
    assert code == 1
    body = json.loads((out / "error.json").read_text())
    assert body["command"] == "nonlinear" and body["error"] == "ValueError"
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1]) == body
    assert _manifest(out)["status"] == "error"


def test_couette_run_artifacts(tmp_path):
    out = tmp_path / "couette"
    assert cli.main(["evolve-mode", "--preset", "couette", "--set", "mode.T_final=10",
                     "--set", "mode.snapshot_every=2", "--out", str(out)]) == 0
    man = _manifest(out)
    assert man["status"] == "ok" and man["config"]["sections"]["mode"]["T_final"] == 10
    for name, digest in man["files"].items():
        assert sha256(out / name) == digest
    fit = json.loads((out / "fit.json").read_text())
    assert abs(fit["c1"]) < 1e-8
    root = ET.parse(out / "profiles.svg").getroot()
    assert root.tag.endswith("svg")
    rows = (out / "norms.csv").read_text().splitlines()
    assert rows[0] == "t,l2,sup,l1,ceiling" and len(rows) == 7


def test_inviscid_flag_uses_inviscid_window(tmp_path):
    out = tmp_path / "inv"
    assert cli.main(["evolve-mode", "--gamma", "0.1", "--M", "10", "--inviscid", "--set", "mode.T_final=1",
                     "--set", "mode.half_width=5", "--out", str(out)]) == 0
    params = _manifest(out)["config"]["params"]
    assert params["regime"] == "Inviscid" and params["nu"] == 0.0
    assert params["eps1"] == pytest.approx(1 / (9 * 10 * math.pi), rel=1e-15)


def test_repeated_runs_are_byte_identical(tmp_path):
    argv = ["evolve-mode", "--preset", "couette", "--set", "mode.T_final=4", "--set", "mode.snapshot_every=1"]
    for name in ("a", "b"):
        assert cli.main(argv + ["--out", str(tmp_path / name)]) == 0
    assert cli.artifact_hashes(tmp_path / "a") == cli.artifact_hashes(tmp_path / "b")


def test_report_collects_criteria(tmp_path, capsys):
    assert cli.main(["evolve-mode", "--preset", "transport", "--set", "mode.T_final=40",
                     "--out", str(tmp_path / "transport")]) == 0
    assert cli.main(["report", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "summary.md").read_text()
    assert "12" in text and text in capsys.readouterr().out
