import json
import subprocess
import sys
from pathlib import Path

import pytest

from drrcalc import cli
from drrcalc.refine import InvariantError, read_curve_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_writes_identical_reports(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, out, _ = run(capsys, "analyze", "--config", CONFIGS / "example1.json",
                           "--method", "convex-full", "--out", d)
        assert code == 0
        assert out.startswith("method: convex-full")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "table.txt").read_text() == out
    log = (a / "refinement.log").read_text().splitlines()
    assert log and all(line.startswith("[") for line in log)


def test_analyze_iteration_flag(capsys):
    code, out, _ = run(capsys, "analyze", "--config", CONFIGS / "three_flows.json",
                       "--method", "full", "--iterations", "1")
    assert code == 0
    assert "[1 iterations]" in out


def test_analyze_dump_curves(tmp_path, capsys):
    code, _, _ = run(capsys, "analyze", "--config", CONFIGS / "three_flows.json", "--method", "simple",
                     "--iterations", "1", "--dump-curves", tmp_path)
    assert code == 0
    dumped = sorted(tmp_path.rglob("*.csv"))
    assert dumped and read_curve_csv(dumped[0]).horizon > 0


def test_soni_table_is_flagged(capsys):
    code, out, _ = run(capsys, "analyze", "--config", CONFIGS / "single_server.json", "--method", "soni")
    assert code == 0
    assert "known to underestimate" in out


def test_curves_command(tmp_path, capsys):
    code, out, _ = run(capsys, "curves", "--config", CONFIGS / "three_flows.json",
                       "--method", "beta0", "--out", tmp_path)
    assert code == 0
    paths = out.split()
    assert len(paths) == 3
    for p in paths:
        curve = read_curve_csv(p)
        assert curve(0) == 0


def test_simulate_command(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--config", CONFIGS / "three_flows.json",
                       "--seed", 3, "--packets", 30, "--out", tmp_path)
    assert code == 0
    assert out.count("respected") == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert all(v["conforms_to_beta0"] for v in summary["classes"].values())
    assert (tmp_path / "trajectory.csv").exists()


def test_counterexample_command(capsys):
    code, out, _ = run(capsys, "counterexample")
    assert code == 0
    assert "Boyer bound:        146.228" in out
    assert "Soni bound:         112.172" in out
    assert "simulated delay:    119.256" in out
    assert "VIOLATION" in out


def test_tightness_command(capsys):
    code, out, _ = run(capsys, "tightness", "--config", CONFIGS / "random.json",
                       "--flow", "1", "--tau", "1e-3")
    assert code == 0
    assert out.strip().endswith("EQUAL")


def test_bad_json_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "analyze", "--config", bad, "--method", "beta0")
    assert code == cli.EXIT_CONFIG == 2
    assert err.startswith("drrcalc:")


def test_missing_file_exit_code(tmp_path, capsys):
    code, _, _ = run(capsys, "analyze", "--config", tmp_path / "absent.json", "--method", "beta0")
    assert code == 2


def test_unstable_exit_code(tmp_path, capsys):
    data = json.loads((CONFIGS / "three_flows.json").read_text())
    data["flows"][0]["arrival"]["rate_bps"] = 10**9
    path = tmp_path / "unstable.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "analyze", "--config", path, "--method", "full")
    assert code == cli.EXIT_UNSTABLE == 3
    assert "unstable" in err


def test_invariant_exit_code(monkeypatch, capsys):
    def broken(*_a, **_k):
        raise InvariantError("curve decreased")
    monkeypatch.setattr(cli, "analyze", broken)
    code, _, err = run(capsys, "analyze", "--config", CONFIGS / "three_flows.json", "--method", "full")
    assert code == cli.EXIT_INVARIANT == 4
    assert "curve decreased" in err


def test_unknown_node(capsys):
    code, _, err = run(capsys, "curves", "--config", CONFIGS / "three_flows.json",
                       "--node", "nowhere", "--out", "unused")
    assert code == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "drrcalc.cli", "--help"],
                          capture_output=True, text=True, check=True)
    for name in ("analyze", "curves", "simulate", "counterexample", "tightness"):
        assert name in proc.stdout


@pytest.mark.parametrize("argv", [[], ["analyze"], ["analyze", "--config", "x", "--method", "magic"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2
