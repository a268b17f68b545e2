import csv
import io
import json

import numpy as np
import pytest

from frenetdrive.config import Config
from frenetdrive.sim import load_scenario, run_scenario, write_outputs
from frenetdrive.sim.runner import LOG_COLUMNS


@pytest.fixture(scope="module")
def run(scenarios_dir):
    cache = {}

    def _run(name, seed=0, **kw):
        key = (name, seed, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = run_scenario(load_scenario(scenarios_dir / f"{name}.json"), Config(), seed, **kw)
        return cache[key]
    return _run


def test_stop_sign_is_obeyed(run):
    res = run("stop_sign")
    assert res.metrics.termination == "goal" and res.metrics.infraction_events == []
    h = res.ego_history
    line = res.route.control_s["ss0"]
    front = np.array([res.route.ref.project(x, y)[0] for x, y in h[:, 1:3]]) + 2.25
    halted = (h[:, 4] < 0.1) & (front <= line) & (front >= line - 2.0)
    assert halted.any()


def test_follows_slow_lead_through_fork(run):
    res = run("slow_lead_fork")
    assert res.metrics.termination == "goal"
    assert res.metrics.infraction_events == []
    assert any(r["mode"] == "following" for r in res.log)


def test_blind_run_reports_layout_collision(run):
    res = run("blind_collision")
    assert res.metrics.termination == "collision_stop"
    assert res.metrics.infraction_penalty == pytest.approx(0.65)
    assert res.metrics.infraction_events[0]["type"] == "collision_layout"
    assert res.metrics.driving_score < 100.0


def test_log_schema(run):
    res = run("empty_road")
    rows = list(csv.reader(io.StringIO(res.log_csv())))
    assert tuple(rows[0]) == LOG_COLUMNS
    assert len(rows) == len(res.log) + 1
    t = [float(r[0]) for r in rows[1:]]
    assert np.allclose(np.diff(t), 0.1)
    assert {r[-1] for r in rows[1:]} <= {"stopping", "following", "merging", "velocity_keeping",
                                         "hold_previous", "emergency_stop"}


def test_write_outputs(run, tmp_path):
    res = run("empty_road")
    mpath, cpath = write_outputs(res, tmp_path / "out")
    doc = json.loads(mpath.read_text())
    assert doc["termination"] == "goal" and doc["route_completion"] == 100.0
    assert cpath.read_text() == res.log_csv()


def test_keep_plans_records_every_tick(run):
    res = run("crossing_pedestrian", keep_plans=True)
    assert len(res.plans) == len(res.log)
    assert all(p.trajectory is not None for p in res.plans)


def test_speed_never_exceeds_limit(run):
    for name in ("empty_road", "red_light", "slow_lead_fork"):
        h = run(name).ego_history
        assert h[:, 4].max() <= Config().limits.v_max + 1e-6
        assert h[:, 4].min() >= 0.0
