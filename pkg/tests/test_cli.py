import csv
import json

import pytest

from frenetdrive.cli import FAN_COLUMNS, fan_rows, main
from frenetdrive.config import Config
from frenetdrive.sim.runner import LOG_COLUMNS


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_outputs(scenarios_dir, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--scenario", str(scenarios_dir / "empty_road.json"), "--out", str(out), "--plot"])
    assert code == 0
    assert json.loads((out / "metrics.json").read_text())["termination"] == "goal"
    assert tuple(read_csv(out / "trajectory.csv")[0]) == LOG_COLUMNS
    assert (out / "trajectory.png").stat().st_size > 0
    assert "driving_score=100.00" in capsys.readouterr().out


def test_run_collision_exit_code(scenarios_dir, tmp_path):
    assert main(["run", "--scenario", str(scenarios_dir / "blind_collision.json"), "--out", str(tmp_path)]) == 2


def test_errors_exit_one(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err
    assert main(["run"]) == 1
    assert main(["fan", "--mode", "sideways", "--out", "x.csv"]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: {n_d: 1.5}\n")
    assert main(["fan", "--mode", "lateral", "--config", str(bad), "--out", str(tmp_path / "f.csv")]) == 1


@pytest.mark.parametrize("mode,count", [("lateral", 7 * 16), ("velocity", 5 * 16)])
def test_fan_csv(tmp_path, mode, count):
    path = tmp_path / f"{mode}.csv"
    assert main(["fan", "--mode", mode, "--out", str(path), "--plot"]) == 0
    rows = read_csv(path)
    assert tuple(rows[0]) == FAN_COLUMNS
    assert len({r[0] for r in rows[1:]}) == count
    assert path.with_suffix(".png").exists()


def test_fan_custom_start():
    rows = fan_rows("lateral", Config(), start=(1.0, 0.0, 0.0))
    assert all(r[2] == pytest.approx(1.0) for r in rows if r[1] == 0.0)


def test_suite(scenarios_dir, tmp_path):
    manifest = tmp_path / "suite.json"
    manifest.write_text(json.dumps({"routes": [
        {"scenario": str(scenarios_dir / "empty_road.json"), "seed": 1},
        str(scenarios_dir / "blind_collision.json"),
    ]}))
    assert main(["suite", "--manifest", str(manifest), "--out", str(tmp_path / "suite")]) == 0
    agg = json.loads((tmp_path / "suite" / "aggregate.json").read_text())
    assert agg["n_routes"] == 2
    rows = read_csv(tmp_path / "suite" / "routes.csv")
    assert [r[1] for r in rows[1:]] == ["goal", "collision_stop"]
    scores = [float(r[4]) for r in rows[1:]]
    assert agg["driving_score"] == pytest.approx(sum(scores) / 2, abs=1e-5)
    assert (tmp_path / "suite" / "00_empty_road" / "metrics.json").exists()


def test_empty_manifest(tmp_path):
    manifest = tmp_path / "suite.json"
    manifest.write_text('{"routes": []}')
    assert main(["suite", "--manifest", str(manifest), "--out", str(tmp_path / "o")]) == 1
