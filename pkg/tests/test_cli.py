import json

import pytest

from boltz_sldg.cli import main

TINY_INI = """
[mesh]
n_cells = 4

[basis]
degree = 1

[velocity]
n_points = 8

[run]
scheme = FBEuler
cfl = 0.5
t_final = 0.01

[epsilon]
value = 1.0
"""

# A large step over the shock-tube jump without the limiter: the multistage
# predictor leaves the physical cone during the first step.
FAILING_INI = """
[mesh]
n_cells = 16
boundary = neumann

[velocity]
n_points = 32

[run]
scheme = ARS443
cfl = 2.0
t_final = 0.02

[epsilon]
value = 1e-2

[initial]
condition = sod
"""


def test_run_writes_csv_and_figures(tmp_path):
    ini = tmp_path / "tiny.ini"
    ini.write_text(TINY_INI)
    out = tmp_path / "out"
    code = main(["run", "--config", str(ini), "--output-dir", str(out)])
    assert code == 0
    assert (out / "final.csv").is_file()
    assert (out / "diagnostics.csv").is_file()
    assert (out / "summary.json").is_file()
    assert (out / "profiles.png").is_file()
    assert (out / "diagnostics.png").is_file()


def test_run_can_skip_figures(tmp_path):
    ini = tmp_path / "tiny.ini"
    ini.write_text(TINY_INI)
    out = tmp_path / "out"
    code = main(
        ["run", "--config", str(ini), "--output-dir", str(out), "--no-figures"]
    )
    assert code == 0
    assert (out / "final.csv").is_file()
    assert not list(out.glob("*.png"))


def test_step_failure_exits_two(tmp_path, capsys):
    ini = tmp_path / "fail.ini"
    ini.write_text(FAILING_INI)
    out = tmp_path / "out"
    code = main(
        ["run", "--config", str(ini), "--output-dir", str(out), "--no-figures"]
    )
    assert code == 2
    assert "step failure" in capsys.readouterr().err


def test_bad_config_exits_three(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\ndt = 0.1\n")
    code = main(["run", "--config", str(ini)])
    assert code == 3
    assert "error:" in capsys.readouterr().err

    code = main(["analyze-tableau", "no-such-tableau"])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_cli_overrides_beat_config(tmp_path):
    ini = tmp_path / "tiny.ini"
    ini.write_text(TINY_INI)
    out = tmp_path / "out"
    code = main(
        [
            "run",
            "--config", str(ini),
            "--output-dir", str(out),
            "--t-final", "0.005",
            "--epsilon", "0.5",
            "--no-figures",
        ]
    )
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["t_final"] == 0.005
    assert summary["config"]["epsilon"] == {"kind": "constant", "value": 0.5}


def test_tableau_report_to_json(tmp_path):
    dest = tmp_path / "report.json"
    code = main(["analyze-tableau", "ARS443", "--json-out", str(dest)])
    assert code == 0
    data = json.loads(dest.read_text())
    assert data["name"] == "ARS443"
    assert data["stages"] == 5
    assert data["z_max"] == pytest.approx(4.0, abs=1e-9)
    assert data["order"]["verdict"] == 2
