import math

import numpy as np
import pytest
from _refs import straight
from hypothesis import given
from hypothesis import strategies as st

from frenetdrive.errors import InputError, NoFeasibleTrajectory
from frenetdrive.frenet import FrenetState
from frenetdrive.planner import (ComfortLimits, CostWeights, ModeInputs, SamplingGrid, TerminalCondition,
                                 assemble_candidates, following_target, gen_following, gen_lateral, gen_merging,
                                 gen_stopping, gen_velocity_keeping, merging_target, plan_tick, select_optimal)
from frenetdrive.polynomial import eval_poly, max_abs_jerk
from frenetdrive.prediction import ObstacleState, constant_velocity_prediction

GRID = SamplingGrid()
W = CostWeights()
LIM = ComfortLimits()
REF = straight(300.0)
num = st.floats(-100, 100)


def test_default_grid_sizes():
    assert GRID.horizons() == pytest.approx([2.0 + 0.2 * i for i in range(16)])
    assert GRID.lateral_offsets() == [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
    assert len(gen_lateral((0, 0, 0), GRID, W)) == 7 * 16


def test_following_example():
    assert following_target((50.0, 10.0, 0.0), 5.0, 1.0) == (35.0, 10.0, 0.0)


@given(num, num, num, st.floats(0, 20), st.floats(0, 3), st.floats(-5, 5))
def test_following_algebra(sp, vp, ap, D0, tau, dv):
    s, v, a = following_target((sp, vp, ap), D0, tau, dv)
    assert s == sp - (D0 + tau * vp)
    assert v == vp + dv - tau * ap
    assert a == ap


@given(num, num, num, num, num, num)
def test_merging_algebra(s1, v1, a1, s2, v2, a2):
    s, v, a = merging_target((s1, v1, a1), (s2, v2, a2))
    assert s == 0.5 * (s1 + s2) and v == 0.5 * (v1 + v2) and a == 0.5 * (a1 + a2)


def test_stopping_candidates_end_at_rest():
    cands = gen_stopping((0.0, 8.0, 0.0), 40.0, GRID, W)
    assert len(cands) == (GRID.n_s + 1) * 16
    targets = sorted({c.tc.target[0] for c in cands})
    assert targets == [34.0, 36.0, 38.0, 40.0]
    for c in cands:
        p, v, a, _ = eval_poly(c.poly, c.poly.T)
        assert (p, v, a) == pytest.approx((c.tc.target[0], 0.0, 0.0), abs=1e-9)


def test_stopping_behind_is_rejected():
    with pytest.raises(InputError):
        gen_stopping((50.0, 5.0, 0.0), 40.0, GRID, W)


def test_following_with_moving_lead():
    lead = lambda T: (30.0 + 6.0 * T, 6.0, 0.0)  # noqa: E731
    cands = gen_following((0.0, 8.0, 0.0), lead, 5.0, 1.0, GRID, W)
    assert cands
    for c in cands:
        s_ref = following_target(lead(c.poly.T), 5.0, 1.0)[0]
        assert c.tc.target[0] == pytest.approx(s_ref)
        assert c.tc.target[1] >= 0


def test_merging_flags_short_gap():
    short = gen_merging((0, 8, 0), (30, 8, 0), (25, 8, 0), GRID, W)
    assert short and not any(c.feasible for c in short)
    wide = gen_merging((0, 8, 0), (60, 8, 0), (30, 8, 0), GRID, W)
    assert all(c.feasible for c in wide)
    assert {c.tc.target[0] for c in wide} == {45.0}


def test_velocity_keeping_targets():
    cands = gen_velocity_keeping((0.0, 8.0, 0.0), 10.0, GRID, W)
    assert len(cands) == 5 * 16
    for c in cands:
        _, v, a, _ = eval_poly(c.poly, c.poly.T)
        assert v == pytest.approx(c.tc.target[0], abs=1e-9) and a == pytest.approx(0.0, abs=1e-9)
    assert {round(c.tc.target[0], 6) for c in cands} == {7.24, 8.62, 10.0, 11.38, 12.76}
    with pytest.raises(InputError):
        gen_velocity_keeping((0, 0, 0), -1.0, GRID, W)


def test_validation():
    with pytest.raises(InputError):
        TerminalCondition("position", (1.0, 0.0), 2.0, "x")
    with pytest.raises(InputError):
        TerminalCondition("velocity", (1.0, 0.0), 0.0, "x")
    with pytest.raises(InputError):
        CostWeights(0, 0, 0, 0, 0)
    with pytest.raises(InputError):
        SamplingGrid(T_min=6.0, T_max=5.0)
    with pytest.raises(InputError):
        ComfortLimits(J_max=0.0)


@given(st.floats(0.0, 9.0), st.floats(-1.5, 1.5), st.floats(-0.5, 0.5))
def test_assembled_candidates_respect_limits(v0, d0, dd0):
    ego = FrenetState(s=20.0, s_dot=v0, d=d0, d_dot=dd0)
    lat = gen_lateral(ego.lat, GRID, W)
    lon = gen_velocity_keeping(ego.lon, 10.0, GRID, W)
    cands = assemble_candidates(lat, lon, REF, LIM, W, 0.1)
    for i in range(len(cands)):
        tr = cands[i]
        assert np.all(tr.v <= LIM.v_max + 1e-9)
        assert np.all(np.abs(tr.a) <= LIM.a_max + 1e-9)
        lat_p, lon_p = tr.frenet_source
        assert max_abs_jerk(lat_p) <= LIM.J_max and max_abs_jerk(lon_p) <= LIM.J_max
        assert lat_p.T == lon_p.T  # matched pairing


def test_all_pairing_is_a_superset():
    ego = FrenetState(s=20.0, s_dot=8.0)
    lat = gen_lateral(ego.lat, GRID, W)
    lon = gen_velocity_keeping(ego.lon, 10.0, GRID, W)
    matched = assemble_candidates(lat, lon, REF, LIM, W, 0.1)
    full = assemble_candidates(lat, lon, REF, LIM, W, 0.1, pairing="all")
    assert len(full) > len(matched)
    with pytest.raises(InputError):
        assemble_candidates(lat, lon, REF, LIM, W, 0.1, pairing="some")


def test_select_optimal_tie_breaks():
    ego = FrenetState(s=20.0, s_dot=8.0)
    cands = assemble_candidates(gen_lateral(ego.lat, GRID, W), gen_velocity_keeping(ego.lon, 8.0, GRID, W),
                                REF, LIM, W, 0.1)
    best = select_optimal(cands)
    assert best.cost == pytest.approx(cands.cost.min())
    listed = [cands[i] for i in range(len(cands))]
    assert select_optimal(listed).frenet_source == best.frenet_source
    with pytest.raises(NoFeasibleTrajectory):
        select_optimal([])


def test_plan_tick_cruise_stays_in_lane():
    res = plan_tick(FrenetState(s=20.0, s_dot=8.0), "velocity_keeping", ModeInputs(v_des=10.0), REF, [],
                    GRID, LIM, W)
    assert res.n_candidates == res.n_collision_free > 0
    assert res.trajectory.lateral_target == 0.0
    assert res.trajectory.v[-1] > 8.0


def test_plan_tick_avoids_obstacle_in_lane():
    ob = ObstacleState("lead", "vehicle", 40.0, 0.0, 0.0, 0.0)
    pred = constant_velocity_prediction(ob, 5.0, 0.1)
    res = plan_tick(FrenetState(s=20.0, s_dot=8.0), "velocity_keeping", ModeInputs(v_des=10.0), REF, [pred],
                    GRID, LIM, W)
    assert res.n_collision_free < res.n_candidates
    assert res.trajectory.lateral_target != 0.0


def test_plan_tick_reports_counts_when_boxed_in():
    preds = [constant_velocity_prediction(ObstacleState(str(k), "vehicle", 27.0, d, 0.0, 0.0, dims=(2.0, 4.5)),
                                          5.0, 0.1) for k, d in enumerate(np.arange(-4.0, 4.5, 1.0))]
    with pytest.raises(NoFeasibleTrajectory) as exc:
        plan_tick(FrenetState(s=20.0, s_dot=8.0), "velocity_keeping", ModeInputs(v_des=10.0), REF, preds,
                  GRID, LIM, W)
    assert exc.value.n_candidates > 0 and exc.value.n_collision_free == 0


def test_plan_tick_stopping_comes_to_rest():
    res = plan_tick(FrenetState(s=20.0, s_dot=5.0), "stopping", ModeInputs(s_d=40.0), REF, [], GRID, LIM, W)
    lat, lon = res.trajectory.frenet_source
    s, v, a, _ = eval_poly(lon, lon.T)
    assert 34.0 - 1e-9 <= s <= 40.0 + 1e-9 and abs(v) < 1e-9


@pytest.mark.parametrize("mode,inputs", [("stopping", ModeInputs()), ("following", ModeInputs()),
                                         ("merging", ModeInputs(pred_pv=(1, 1, 0))), ("flying", ModeInputs())])
def test_plan_tick_missing_inputs(mode, inputs):
    with pytest.raises(InputError):
        plan_tick(FrenetState(s=20.0, s_dot=5.0), mode, inputs, REF, [], GRID, LIM, W)


def test_weights_scale_costs_uniformly():
    a = gen_lateral((0.3, 0, 0), GRID, W)
    b = gen_lateral((0.3, 0, 0), GRID, W.scaled(2.0))
    assert np.allclose([2 * c.cost for c in a], [c.cost for c in b])
    assert math.isclose(W.scaled(2.0).k_j, 0.2)
