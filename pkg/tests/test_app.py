import json
import os

import pytest

from app import _parse_sets, main
from errors import ConfigError

QUICK_GATE = ["--set", "omega2=0.5", "--set", "delta=10", "--set", "u_rr=10"]


def test_list_prints_the_registry(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("fig2d", "fig4", "gate-dissipative", "fig6", "fig8", "fig10", "fig11"):
        assert name in out
    assert "omega2=0.05" in out


def test_parse_sets():
    assert _parse_sets(["omega2=0.04", "delta = 100"]) == {"omega2": 0.04, "delta": 100.0}
    with pytest.raises(ConfigError):
        _parse_sets(["omega2"])
    with pytest.raises(ConfigError):
        _parse_sets(["omega2=fast"])


def test_run_then_check_then_history(tmp_path, capsys):
    out = str(tmp_path / "res")
    assert main(["run", "fig4", "--out", out, *QUICK_GATE]) == 0
    assert os.path.isfile(os.path.join(out, "fig4", "metadata.json"))

    # the quick setting is far from the reference gate time, so only the structure is checked
    code = main(["check", out])
    assert code in (0, 1)
    assert "criteria passed" in capsys.readouterr().out

    assert main(["history", "--out", out]) == 0
    assert "fig4" in capsys.readouterr().out
    assert main(["history", "--out", out, "--id", "1"]) == 0
    run = json.loads(capsys.readouterr().out)
    assert run["parameters"]["omega2"] == 0.5
    assert main(["history", "--out", out, "--id", "42"]) == 1


def test_config_file_with_cli_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"experiment": "fig4", "overrides": {"omega2": 0.5, "delta": 10, "u_rr": 10},
                               "integrator": {"method": "fixed"}}), encoding="utf-8")
    out = str(tmp_path / "res")
    assert main(["run", "--config", str(cfg), "--out", out, "--set", "omega1=1.5"]) == 0
    with open(os.path.join(out, "fig4", "metadata.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    assert meta["provenance"]["parameters"]["omega1"] == 1.5
    assert meta["provenance"]["parameters"]["omega2"] == 0.5
    assert meta["provenance"]["integrator"]["method"] == "fixed"


def test_errors_exit_with_code_2(tmp_path, caplog):
    assert main(["check", str(tmp_path / "missing")]) == 2
    assert main(["run", "fig99"]) == 2
    assert main(["run", "fig4", "--set", "omega3=1"]) == 2
    assert main(["run"]) == 2
    assert any("Unknown parameter" in r.getMessage() for r in caplog.records)


def test_check_only_missing_experiment(tmp_path):
    out = str(tmp_path / "res")
    assert main(["run", "fig4", "--out", out, *QUICK_GATE]) == 0
    assert main(["check", out, "--only", "fig6"]) == 2


@pytest.mark.parametrize(
    "experiment, setting",
    [("fig4", "omega2=0"), ("gate-dissipative", "omega2=0"), ("fig2d", "omega_ratio=0"),
     ("fig11", "record_points=0"), ("fig6", "window=0")],
)
def test_degenerate_settings_exit_with_code_2(tmp_path, experiment, setting):
    assert main(["run", experiment, "--set", setting, "--out", str(tmp_path)]) == 2
    assert not os.path.exists(os.path.join(str(tmp_path), experiment))
