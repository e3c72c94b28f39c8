import json

import numpy as np
import pytest

from ssdelay import cli
from ssdelay.errors import ConfigurationError


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_simulate_writes_trajectory_and_manifest(tmp_path):
    rc = run(tmp_path, "simulate", "--alpha", "0.75", "--tau", "1.0", "--seed", "const:0.3",
             "--t-end", "200", "--step", "0.01")
    assert rc == 0
    header, data = cli.read_numeric_csv(tmp_path / "trajectory.csv")
    assert header[0] == "t"
    assert data[-1, 1] == pytest.approx(0.5, abs=1e-3)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "simulate"
    assert "trajectory.csv" in man["outputs"]
    assert man["parameters"]["alpha"] == 0.75


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 0.6\ntau = 2.0\n")
    out = tmp_path / "o"
    assert cli.main(["roots", "--config", str(cfg), "--alpha", "0.75", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["parameters"] == {"alpha": 0.75, "tau": 2.0}


def test_bad_parameters_exit_2(tmp_path):
    assert run(tmp_path, "simulate", "--alpha", "1.5", "--tau", "1.0", "--t-end", "1") == 2
    assert run(tmp_path, "roots", "--alpha", "0.75") == 2
    assert run(tmp_path, "simulate", "--alpha", "0.75", "--tau", "1.0", "--seed", "bogus:1") == 2


def test_divergence_exit_3(tmp_path):
    # a huge constant seed leaves the cubic model's basin of numerical stability
    rc = run(tmp_path, "simulate", "--alpha", "0.75", "--tau", "1.0", "--seed", "const:1e4",
             "--t-end", "10", "--step", "0.1")
    assert rc == 3


def test_scan_inconsistency_exit_4(tmp_path):
    rc = run(tmp_path, "hidden-scan", "--alphas", "0.75", "--bracket", "1.65,1.70",
             "--horizon", "400", "--step", "0.002")
    assert rc == 4


def test_roots_freqcheck_curves(tmp_path):
    assert run(tmp_path, "roots", "--alpha", "0.75", "--tau", "1.58", "--n-max", "3") == 0
    assert (tmp_path / "roots.csv").read_text().count("\n") >= 4
    assert run(tmp_path, "freqcheck", "--alpha", "0.75", "--tau", "1.58", "--nu0", "0.88",
               "--Lambda", "0.45") == 0
    fc = json.loads((tmp_path / "freqcheck.json").read_text())
    assert fc["holds"] is True
    assert run(tmp_path, "curves", "--alpha-grid", "0.6,0.9,4") == 0
    lines = (tmp_path / "curves.csv").read_text().splitlines()
    assert lines[0] == "kind,alpha,tau" and len(lines) == 9


def test_project_command(tmp_path):
    assert run(tmp_path, "project", "--alpha", "0.75", "--tau", "1.58", "--seed", "const:1") == 0
    d = json.loads((tmp_path / "projection.json").read_text())
    assert isinstance(d, (dict, list))


def test_plot_is_deterministic(tmp_path):
    csv = tmp_path / "in.csv"
    csv.write_text("t,x\n0,0\n1,1\n2,0.5\n")
    assert run(tmp_path / "a", "plot", "--input", str(csv)) == 0
    assert run(tmp_path / "b", "plot", "--input", str(csv)) == 0
    a = (tmp_path / "a" / "plot.svg").read_text()
    assert a == (tmp_path / "b" / "plot.svg").read_text()
    assert a.startswith("<svg")


def test_plot_empty_and_malformed(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t,x\n")
    assert run(tmp_path, "plot", "--input", str(empty)) == 0
    assert "<svg" in (tmp_path / "plot.svg").read_text()
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x\n0,abc\n")
    assert run(tmp_path, "plot", "--input", str(bad)) == 2


def test_output_names_cannot_escape(tmp_path):
    csv = tmp_path / "in.csv"
    csv.write_text("t,x\n0,0\n1,1\n")
    assert run(tmp_path / "o", "plot", "--input", str(csv), "--name", "../escape.svg") == 2
    assert not (tmp_path / "escape.svg").exists()
    out = cli.Outputs(tmp_path / "p")
    with pytest.raises(ConfigurationError):
        out.path("/etc/x")


def test_parse_seed():
    s = cli.parse_seed("cos:4,4", 2.4, 240)
    assert s.values[-1, 0] == pytest.approx(8.0)
    assert s.values[0, 0] == pytest.approx(4 * np.cos(-2.4) + 4)
    e = cli.parse_seed("exp:-3,3", 2.4, 240)
    assert e.values[-1, 0] == pytest.approx(0.0)
    lin = cli.parse_seed("linear:-0.036,0.036", 1.58, 158)
    assert lin.values[0, 0] == -0.036 and lin.values[-1, 0] == 0.036
    for bad in ("const", "const:1,2", "wave:1", "linear:a,b"):
        with pytest.raises(ConfigurationError):
            cli.parse_seed(bad, 1.0, 10)


def test_unknown_flag_is_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "roots", "--alp", "0.75")
    assert exc.value.code == 2
