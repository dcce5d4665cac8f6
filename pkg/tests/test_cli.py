import json
import subprocess
import sys

import pytest

from echelon.cli import main
from echelon.experiment import read_front_csv

SMALL = ["--set", "population_size=12", "--set", "offspring_per_generation=4", "--budget", "2"]


def test_scenario_validate_and_show(capsys, tmp_path):
    assert main(["scenario", "validate", "moderate"]) == 0
    assert "ok: moderate" in capsys.readouterr().out
    assert main(["scenario", "show", "simple"]) == 0
    toml = capsys.readouterr().out
    (tmp_path / "s.toml").write_text(toml)
    assert main(["scenario", "validate", str(tmp_path / "s.toml")]) == 0


def test_exit_codes(tmp_path, capsys):
    assert main(["frobnicate"]) == 1
    assert main(["run", "nsga2", "--scenario", "simple", "--out", str(tmp_path)]) == 1  # no seed
    assert main(["scenario", "validate", "no-such-scenario"]) == 2
    (tmp_path / "bad.toml").write_text("name = 'x'\n")
    assert main(["scenario", "validate", str(tmp_path / "bad.toml")]) == 2
    assert main(["run", "nsga2", "--scenario", "simple", "--seed", "1", "--out", str(tmp_path / "r"),
                 "--set", "bogus=1"]) == 2
    assert main(["report", "operational", str(tmp_path)]) == 3
    assert main(["metrics", "compute", "--front", str(tmp_path / "missing.csv"), "--ref", "0,0,0"]) == 3


def test_demand_sample(tmp_path, capsys):
    assert main(["demand", "sample", "simple", "--seed", "4", "--out", str(tmp_path / "d.csv")]) == 0
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t,market_id,demand"
    assert main(["demand", "sample", "--scenario", "simple", "--seed", "4"]) == 0
    assert capsys.readouterr().out.splitlines() == lines


def test_run_collision_and_metrics(tmp_path, capsys):
    args = ["run", "nsga2", "--scenario", "simple", "--seeds", "7", "--out", str(tmp_path), *SMALL]
    assert main(args) == 0
    assert main(args) == 3
    assert main([*args, "--force"]) == 0
    capsys.readouterr()
    assert main(["metrics", "compute", "--front", str(tmp_path / "seed-7" / "front.csv")]) == 0
    rec = json.loads(capsys.readouterr().out)
    summ = json.loads((tmp_path / "seed-7" / "summary.json").read_text())
    assert rec["hypervolume"] == summ["hypervolume"]


def test_jobs_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("ECHELON_JOBS", "2")
    assert main(["run", "nsga2", "--scenario", "simple", "--seeds", "1,2", "--out", str(tmp_path / "a"), *SMALL]) == 0
    monkeypatch.delenv("ECHELON_JOBS")
    assert main(["run", "nsga2", "--scenario", "simple", "--seeds", "1,2", "--out", str(tmp_path / "b"), *SMALL]) == 0
    for s in (1, 2):
        assert (tmp_path / "a" / f"seed-{s}" / "front.csv").read_bytes() == (
            tmp_path / "b" / f"seed-{s}" / "front.csv"
        ).read_bytes()
    monkeypatch.setenv("ECHELON_JOBS", "many")
    assert main(["run", "nsga2", "--scenario", "simple", "--seed", "1", "--out", str(tmp_path / "c"), *SMALL]) == 1


def test_manifest_run_aggregate_report(tmp_path, capsys):
    out = tmp_path / "runs"
    (tmp_path / "m.toml").write_text(
        f'scenario = "simple"\nalgorithm = "morld"\nseeds = [2]\nout = "{out}"\nbudget = 24\n'
        "[overrides]\nes_population = 6\neval_episodes = 2\nexchange_interval = 2\nbounds_iterations = 2\n"
    )
    assert main(["run", "morld", "--manifest", str(tmp_path / "m.toml"), "--psa", "--shared-pool"]) == 0
    cfg = json.loads((out / "seed-2" / "config.json").read_text())
    assert cfg["solver"]["psa_enabled"] and cfg["solver"]["shared_pool_enabled"]
    assert cfg["solver"]["iterations"] == 4
    assert main(["aggregate", str(out), "--out", str(tmp_path / "agg")]) == 0
    assert (tmp_path / "agg" / "report.csv").is_file()
    assert main(["report", "operational", str(out / "seed-2")]) == 0
    n = len(read_front_csv(out / "seed-2" / "front.csv"))
    assert len(list((out / "seed-2" / "operational").glob("*-demand_loss.csv"))) == n
    assert main(["run", "nsga2", "--manifest", str(tmp_path / "m.toml")]) == 1


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "echelon.cli", "scenario", "validate", "complex"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
