import json
import subprocess
import sys

import pytest

from infoagg import cli, experiments
from infoagg.output import Check

FAST = {
    "baseline": {"gamma": 2.0, "sigma_eta": 0.5 ** 0.5, "supply": 1.0, "theta": 3.0},
    "report": {"n_reps": 50},
    "sweep": {"sigma_y": 3.0, "m_max": 12, "n_reps": 1000},
    "recover": {"n_reps": 200},
    "stability": {"deltas": [0.005, 0.05]},
    "lln": {"sizes": [100, 1000, 10000, 100000], "n_seeds": 100},
    "chatbot": {"n_agents": 10000, "n_trials": 5},
    "oracle-check": {"n_draws": 100},
}


def run(tmp_path, name, cfg, *extra):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    proc = subprocess.run([sys.executable, "-m", "infoagg.cli", name, "--config", str(path),
                           "--out", str(out), *extra], capture_output=True, text=True)
    return proc, out


def read(out, suffix):
    return out.with_name(out.name + suffix).read_bytes()


def test_help_lists_exit_codes():
    proc = subprocess.run([sys.executable, "-m", "infoagg.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "exit codes" in proc.stdout and "oracle-check" in proc.stdout


@pytest.mark.parametrize("name", experiments.EXPERIMENTS)
def test_experiment_runs_and_passes(tmp_path, name):
    proc, out = run(tmp_path, name, FAST[name])
    assert proc.returncode == 0, proc.stdout + proc.stderr
    summary = read(out, ".summary.txt").decode()
    assert summary.rstrip().endswith("result: PASS")
    for line in summary.splitlines():
        if line.startswith("check "):
            assert all(k in line for k in ("analytic=", "empirical=", "tolerance="))
            assert line.endswith(" PASS")
    header = read(out, ".csv").decode().splitlines()[0]
    assert header and "," in header


def test_baseline_reports_price_two(tmp_path):
    proc, out = run(tmp_path, "baseline", FAST["baseline"])
    summary = read(out, ".summary.txt").decode()
    line = next(ln for ln in summary.splitlines() if ln.startswith("check price_formula"))
    fields = dict(tok.split("=") for tok in line.split()[2:5])
    # sigma_eta = sqrt(0.5) squares to 0.5 only up to rounding
    assert abs(float(fields["analytic"]) - 2.0) <= 1e-14
    assert abs(float(fields["empirical"]) - 2.0) <= 1e-14


def test_sweep_csv_marks_infinite_precision(tmp_path):
    proc, out = run(tmp_path, "sweep", FAST["sweep"], "--svg")
    lines = read(out, ".csv").decode().splitlines()
    assert lines[0] == "m,b,alpha_z,alpha_hat,stderr"
    assert lines[1].split(",")[2:] == ["inf", "inf", "inf"]
    assert "" not in lines[1].split(",")
    svg = read(out, ".svg").decode()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    assert "href" not in svg


def test_csv_byte_identical_across_runs_and_workers(tmp_path):
    cfg = {"n_reps": 40, "n_agents": 500, "seed": 5}
    outs = []
    for sub, extra in (("a", ()), ("b", ("--workers", "8")), ("c", ())):
        (tmp_path / sub).mkdir()
        proc, out = run(tmp_path / sub, "report", cfg, *extra)
        assert proc.returncode == 0
        outs.append(read(out, ".csv"))
    assert outs[0] == outs[1] == outs[2]


def test_overrides_reach_summary(tmp_path):
    proc, out = run(tmp_path, "report", {}, "--seed", "77", "--reps", "30", "--agents", "150")
    summary = read(out, ".summary.txt").decode()
    assert "setting seed = 77" in summary
    assert "setting n_reps = 30" in summary
    assert "setting n_agents = 150" in summary
    assert len(read(out, ".csv").decode().splitlines()) == 31


@pytest.mark.parametrize("cfg", [
    {"sigma_x": 1.0, "sigmax": 2.0},
    {"theta": {"mean": 0, "sd": 1}},
    {"sigma_x": "one"},
    {"publishers": 1},
    {"sigma_x": -1.0},
])
def test_config_errors_exit_2(tmp_path, cfg):
    proc, _ = run(tmp_path, "baseline", cfg)
    assert proc.returncode == 2
    assert "config error" in proc.stderr


def test_malformed_json_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{sigma_x: 1")
    proc = subprocess.run([sys.executable, "-m", "infoagg.cli", "report", "--config", str(path),
                           "--out", str(tmp_path / "r")], capture_output=True, text=True)
    assert proc.returncode == 2


def test_numerical_failure_exit_3(tmp_path):
    proc, _ = run(tmp_path, "stability", {"deltas": [1e-4], "max_iter": 100})
    assert proc.returncode == 3
    assert "numerical error" in proc.stderr


def test_logistic_conditioning_exit_3(tmp_path):
    cfg = {"query_map": {"kind": "logistic", "scale": 0.01}, "n_agents": 1000, "n_trials": 1}
    proc, _ = run(tmp_path, "chatbot", cfg)
    assert proc.returncode == 3


def test_failed_check_exit_4(tmp_path, monkeypatch):
    def failing(spec):
        return ("x",), [(1,)], [Check("always", 0.0, 1.0, 0.5, False)], [], None
    monkeypatch.setitem(experiments.RUNNERS, "oracle-check", failing)
    path = tmp_path / "c.json"
    path.write_text("{}")
    code = cli.main(["oracle-check", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == 4
    assert (tmp_path / "o.summary.txt").read_text().rstrip().endswith("result: FAIL")


def test_io_errors_exit_5(tmp_path):
    proc, _ = run(tmp_path, "oracle-check", {"n_draws": 5}, "--out",
                  str(tmp_path / "missing" / "dir" / "o"))
    assert proc.returncode == 5
    proc = subprocess.run([sys.executable, "-m", "infoagg.cli", "report", "--config",
                           str(tmp_path / "nope.json")], capture_output=True, text=True)
    assert proc.returncode == 5
