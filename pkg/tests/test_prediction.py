import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frenetdrive.errors import InputError, ScenarioError
from frenetdrive.prediction import (ObstacleState, build_dense_graph, constant_velocity_prediction, extract_paths,
                                    path_length, predict_all, pure_pursuit_rollout, spatial_query, travel_distance)
from frenetdrive.roadmap import WorldMap, load_map


@pytest.fixture(scope="module")
def fork(scenarios_dir):
    return build_dense_graph(load_map(scenarios_dir / "maps" / "fork.json"), 1.0)


def brute_nearest(graph, p):
    d = np.hypot(graph.xy[:, 0] - p[0], graph.xy[:, 1] - p[1])
    return int(np.flatnonzero(d == d.min())[0])


@given(st.floats(-20, 210), st.floats(-40, 40))
def test_spatial_query_matches_brute_force(fork, x, y):
    assert spatial_query(fork, (x, y)) == brute_nearest(fork, (x, y))


def test_graph_structure(fork):
    lengths = [L for _, _, L in fork.edges]
    assert max(lengths) <= 1.0 + 1e-9
    branching = [i for i in range(len(fork)) if fork.out_degree(i) == 2]
    assert len(branching) == 1
    assert fork.xy[branching[0]] == pytest.approx((100.0, 0.0))
    assert sum(fork.out_degree(i) == 0 for i in range(len(fork))) == 2


def test_fork_yields_two_paths(fork):
    start = spatial_query(fork, (80.0, 0.0))
    paths = extract_paths(fork, start, 40.0, 1.0)
    assert len(paths) == 2
    ends = sorted(fork.xy[p[-1]][1] for p in paths)
    assert ends[0] < 0 < ends[1]
    for p in paths:
        assert abs(path_length(fork, p) - 40.0) <= 1.0


def test_dead_end_ends_path_early(fork):
    start = spatial_query(fork, (180.0, 20.0))
    paths = extract_paths(fork, start, 50.0, 1.0)
    assert len(paths) == 1 and path_length(fork, paths[0]) < 50.0
    with pytest.raises(InputError):
        extract_paths(fork, start, 0.0, 1.0)


def test_empty_map():
    with pytest.raises(ScenarioError):
        build_dense_graph(WorldMap(roads=[]))


@pytest.mark.parametrize("offset", [-1.5, 1.0, 0.5])
def test_pure_pursuit_converges_to_path(offset):
    ob = ObstacleState("v", "vehicle", 0.0, offset, 0.0, 8.0)
    pred = pure_pursuit_rollout(ob, np.array([[0.0, 0.0], [200.0, 0.0]]), 5.0, 0.1)
    assert len(pred.points) == 51
    assert abs(pred.points[-1, 2]) < 0.1
    assert np.all(np.diff(pred.points[:, 1]) > 0)


def test_pure_pursuit_follows_curve(fork):
    start = spatial_query(fork, (90.0, 0.0))
    path = extract_paths(fork, start, 60.0, 1.0)[0]
    ob = ObstacleState("v", "vehicle", 90.0, 0.0, 0.0, 10.0)
    pred = pure_pursuit_rollout(ob, fork.xy[path], 5.0, 0.1)
    xy = fork.xy[path]
    for x, y in pred.points[10:, 1:3]:
        assert np.hypot(xy[:, 0] - x, xy[:, 1] - y).min() < 0.5


def test_pure_pursuit_speed_profile():
    ob = ObstacleState("v", "vehicle", 0.0, 0.0, 0.0, 4.0, a=-2.0)
    pred = pure_pursuit_rollout(ob, np.array([[0.0, 0.0], [100.0, 0.0]]), 5.0, 0.1)
    assert pred.points[-1, 4] == 0.0
    assert pred.points[-1, 1] == pytest.approx(4.0, abs=0.05)  # v^2 / 2|a|
    assert pred.accel_at(0.5) == pytest.approx(-2.0)
    with pytest.raises(InputError):
        pure_pursuit_rollout(ObstacleState("v", "vehicle", 0, 0, 0, -1.0), np.zeros((2, 2)) + [[0, 0], [1, 0]],
                             1.0, 0.1)


def test_travel_distance_never_reverses():
    assert travel_distance(10.0, 0.0, 5.0) == 50.0
    assert travel_distance(10.0, 2.0, 5.0) == 75.0
    assert travel_distance(10.0, -5.0, 5.0) == 10.0
    assert travel_distance(0.0, -1.0, 5.0) == 0.0


def test_constant_velocity_and_pose_hold():
    ob = ObstacleState("p", "pedestrian", 0.0, 0.0, math.pi / 2, 1.5, dims=(0.6, 0.6))
    pred = constant_velocity_prediction(ob, 2.0, 0.1)
    assert pred.points[-1, 1:3] == pytest.approx((0.0, 3.0))
    assert pred.pose_at(10.0)[1] == pytest.approx(3.0)
    assert pred.pose_at(1.0)[1] == pytest.approx(1.5)


def test_predict_all_routes_by_kind(fork):
    obs = [ObstacleState("b", "vehicle", 80.0, 0.0, 0.0, 8.0),
           ObstacleState("a", "pedestrian", 50.0, -5.0, math.pi / 2, 1.0, dims=(0.6, 0.6)),
           ObstacleState("c", "vehicle", 50.0, 300.0, 0.0, 8.0),
           ObstacleState("d", "static", 30.0, 0.0, 0.0, 0.0)]
    preds = predict_all(obs, fork, 5.0, 0.1)
    assert [p.source_obstacle for p in preds] == ["a", "b", "b", "c", "d"]
    assert [p.path_id for p in preds if p.source_obstacle == "b"] == [0, 1]
    # the off-map vehicle and the static object move in a straight line
    assert preds[3].points[-1, 1] == pytest.approx(90.0)
    assert np.allclose(preds[4].points[:, 1], 30.0)
