"""Map-based trajectory prediction for surrounding agents.

Road centerlines are resampled into a dense directed graph.  A vehicle is
snapped to its nearest node, every path of roughly the distance it will
cover over the horizon is enumerated breadth-first, and a pure-pursuit
rollout along each path gives one predicted trajectory per path.
Pedestrians are not on the graph and are predicted at constant velocity.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, ScenarioError
from .frenet import build_reference, wrap_angle


@dataclass(frozen=True)
class ObstacleState:
    """Perceived state of a moving obstacle.

    ``dims`` is ``(w, l)``.  ``height`` and ``z`` are carried for
    completeness and unused in the planar stack.
    """

    id: str
    kind: str
    x: float
    y: float
    yaw: float
    v: float
    a: float = 0.0
    dims: Tuple[float, float] = (2.0, 4.5)
    height: Optional[float] = None
    z: Optional[float] = None


@dataclass(eq=False)
class PredictedTrajectory:
    """Rows of ``(t, x, y, theta, v)`` at a fixed time step."""

    points: np.ndarray
    source_obstacle: str
    path_id: int
    kind: str = "vehicle"
    dims: Tuple[float, float] = (2.0, 4.5)

    @property
    def t(self):
        return self.points[:, 0]

    def pose_at(self, t: float) -> Tuple[float, float, float]:
        """Interpolated ``(x, y, theta)``; held at the last row past the end."""
        tt = self.points[:, 0]
        x = np.interp(t, tt, self.points[:, 1])
        y = np.interp(t, tt, self.points[:, 2])
        th = np.interp(t, tt, np.unwrap(self.points[:, 3]))
        return float(x), float(y), float(wrap_angle(th))

    def accel_at(self, t: float) -> float:
        tt, v = self.points[:, 0], self.points[:, 4]
        if len(tt) < 2:
            return 0.0
        k = int(np.clip(np.searchsorted(tt, t, side="right") - 1, 0, len(tt) - 2))
        return float((v[k + 1] - v[k]) / (tt[k + 1] - tt[k]))


class RoadGraph:
    """Dense directed graph over road centerlines with a nearest-node index.

    Node ``i`` has position ``xy[i]`` and heading ``heading[i]``;
    ``succ[i]`` lists ``(j, length)`` edges.
    """

    def __init__(self, xy: np.ndarray, heading: np.ndarray, succ: List[List[Tuple[int, float]]],
                 road_of: List[str], ds: float):
        self.xy = np.asarray(xy, dtype=float)
        self.heading = np.asarray(heading, dtype=float)
        self.succ = succ
        self.road_of = road_of
        self.ds = ds
        self._tree = cKDTree(self.xy)

    def __len__(self):
        return len(self.xy)

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return [(i, j, L) for i, out in enumerate(self.succ) for j, L in out]

    def out_degree(self, node: int) -> int:
        return len(self.succ[node])

    def nearest(self, point, k: int = 1):
        """``k`` nearest nodes as ``(distance, id)`` pairs, distance then id ordered."""
        k = min(k, len(self))
        dist, idx = self._tree.query(np.asarray(point, dtype=float), k=k)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        # widen to every node tied with the k-th distance so ordering is by id
        extra = self._tree.query_ball_point(np.asarray(point, dtype=float), float(dist[-1]) + 1e-9)
        cand = sorted((float(np.hypot(*(self.xy[j] - point))), int(j)) for j in set(extra) | set(idx.tolist()))
        return cand[:k] if len(cand) >= k else cand


def build_dense_graph(world_map, ds: float = 1.0) -> RoadGraph:
    """Resample every road at spacing ``<= ds`` and wire declared successors.

    The end node of a road and the start node of each declared successor
    are fused when they coincide (within ``ds / 4``); otherwise a connector
    edge joins them.
    """
    roads = world_map.roads if hasattr(world_map, "roads") else world_map["roads"]
    if not roads:
        raise ScenarioError("map has no roads")
    if not ds > 0:
        raise InputError("ds must be positive")

    # union-find over road ends that declared successorship ties together
    parent: Dict[Tuple[str, str], Tuple[str, str]] = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    by_id = {r.id: r for r in roads}
    for r in roads:
        for sid in r.successors:
            a_end, b_start = r.waypoints[-1], by_id[sid].waypoints[0]
            if math.hypot(a_end[0] - b_start[0], a_end[1] - b_start[1]) <= ds / 4.0:
                ra, rb = find((r.id, "end")), find((sid, "start"))
                if ra != rb:
                    parent[rb] = ra

    xy, heading, road_of = [], [], []
    succ: List[List[Tuple[int, float]]] = []
    shared: Dict[Tuple[str, str], int] = {}
    ends: Dict[str, Tuple[int, int]] = {}

    def new_node(x, y, h, rid):
        xy.append((x, y))
        heading.append(h)
        road_of.append(rid)
        succ.append([])
        return len(xy) - 1

    for r in roads:
        ref = build_reference(r.waypoints, ds)
        ids = []
        last = len(ref.s) - 1
        for k in range(len(ref.s)):
            key = None
            if k == 0:
                key = find((r.id, "start"))
            elif k == last:
                key = find((r.id, "end"))
            if key is not None and key in shared:
                ids.append(shared[key])
                continue
            nid = new_node(float(ref.x[k]), float(ref.y[k]), float(ref.heading[k]), r.id)
            if key is not None:
                shared[key] = nid
            ids.append(nid)
        for a, b in zip(ids[:-1], ids[1:]):
            succ[a].append((b, float(np.hypot(xy[b][0] - xy[a][0], xy[b][1] - xy[a][1]))))
        ends[r.id] = (ids[0], ids[-1])

    for r in roads:
        a = ends[r.id][1]
        for sid in r.successors:
            b = ends[sid][0]
            if a != b and all(j != b for j, _ in succ[a]):
                succ[a].append((b, float(np.hypot(xy[b][0] - xy[a][0], xy[b][1] - xy[a][1]))))
    return RoadGraph(np.array(xy), np.array(heading), succ, road_of, ds)


def spatial_query(graph: RoadGraph, point) -> int:
    """Id of the node nearest to ``point``; ties go to the lowest id."""
    return graph.nearest(point, k=1)[0][1]


def extract_paths(graph: RoadGraph, start_node: int, desired_len: float, tol: float) -> List[List[int]]:
    """Breadth-first enumeration of simple paths about ``desired_len`` long.

    A path is emitted once its length reaches ``desired_len`` (or would
    overshoot ``desired_len + tol`` with the next edge while already within
    ``tol``), or when it cannot be extended: dead ends and revisits end a
    path early at its shorter length.
    """
    if not desired_len > 0:
        raise InputError("desired_len must be positive")
    if not graph.succ[start_node]:
        return []
    out = []
    queue = deque([((start_node,), 0.0)])
    while queue:
        path, length = queue.popleft()
        if length >= desired_len - 1e-9:
            out.append(list(path))
            continue
        nexts = [(j, L) for j, L in graph.succ[path[-1]] if j not in path]
        if not nexts:
            out.append(list(path))
            continue
        for j, L in nexts:
            if length + L > desired_len + tol and length >= desired_len - tol:
                out.append(list(path))
                break
            queue.append((path + (j,), length + L))
    return out


def path_length(graph: RoadGraph, path: Sequence[int]) -> float:
    return float(sum(np.hypot(*(graph.xy[b] - graph.xy[a])) for a, b in zip(path[:-1], path[1:])))


def lookahead_distance(v: float, gain: float = 0.5, lo: float = 3.0, hi: float = 15.0) -> float:
    return min(max(gain * v, lo), hi)


def pure_pursuit_rollout(obstacle: ObstacleState, path_xy: np.ndarray, t_h: float, dt: float,
                         v_cap: float = math.inf, lookahead: Optional[float] = None,
                         path_id: int = 0, substeps: int = 10) -> PredictedTrajectory:
    """Roll a kinematic model along ``path_xy`` with pure-pursuit steering.

    Speed follows ``clamp(v0 + a0 t, 0, v_cap)``.  The path is extended
    straight past its last point so an obstacle that overruns it keeps its
    final heading.
    """
    path = np.asarray(path_xy, dtype=float).reshape(-1, 2)
    if len(path) == 0:
        raise InputError("empty path")
    if obstacle.v < 0:
        raise InputError("obstacle speed must be non-negative")
    v0, a0 = obstacle.v, obstacle.a
    if len(path) >= 2:
        tail = path[-1] - path[-2]
        tail /= np.hypot(*tail)
    else:
        tail = np.array([math.cos(obstacle.yaw), math.sin(obstacle.yaw)])
    run = max(v0, v_cap if math.isfinite(v_cap) else v0 + max(a0, 0) * t_h) * t_h + 20.0
    path = np.vstack([path, path[-1] + tail * run])
    seg = np.diff(path, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = seg_len > 1e-9
    path = np.vstack([path[:1], path[1:][keep]])
    seg, seg_len = seg[keep], seg_len[keep]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])

    def speed(t):
        return min(max(v0 + a0 * t, 0.0), v_cap)

    x, y, th = obstacle.x, obstacle.y, obstacle.yaw
    n = int(round(t_h / dt))
    rows = [(0.0, x, y, th, speed(0.0))]
    h = dt / substeps
    for k in range(n):
        for m in range(substeps):
            t = k * dt + m * h
            v = speed(t + 0.5 * h)
            if v <= 0.0:
                continue
            Ld = lookahead if lookahead is not None else lookahead_distance(v)
            # projection onto the path
            px, py = x - path[:-1, 0], y - path[:-1, 1]
            u = np.clip((px * seg[:, 0] + py * seg[:, 1]) / (seg_len ** 2), 0.0, 1.0)
            d2 = (px - u * seg[:, 0]) ** 2 + (py - u * seg[:, 1]) ** 2
            i = int(np.argmin(d2))
            s_target = cum[i] + u[i] * seg_len[i] + Ld
            lx = np.interp(s_target, cum, path[:, 0])
            ly = np.interp(s_target, cum, path[:, 1])
            alpha = math.atan2(ly - y, lx - x) - th
            kappa = 2.0 * math.sin(alpha) / Ld
            # midpoint step of the unicycle
            thm = th + 0.5 * v * kappa * h
            x += v * math.cos(thm) * h
            y += v * math.sin(thm) * h
            th += v * kappa * h
        rows.append(((k + 1) * dt, x, y, float(wrap_angle(th)), speed((k + 1) * dt)))
    return PredictedTrajectory(np.array(rows), obstacle.id, path_id, obstacle.kind, tuple(obstacle.dims))


def constant_velocity_prediction(obstacle: ObstacleState, t_h: float, dt: float, path_id: int = 0) -> PredictedTrajectory:
    n = int(round(t_h / dt))
    t = np.arange(n + 1) * dt
    c, s = math.cos(obstacle.yaw), math.sin(obstacle.yaw)
    rows = np.column_stack([t, obstacle.x + obstacle.v * c * t, obstacle.y + obstacle.v * s * t,
                            np.full_like(t, obstacle.yaw), np.full_like(t, obstacle.v)])
    return PredictedTrajectory(rows, obstacle.id, path_id, obstacle.kind, tuple(obstacle.dims))


def travel_distance(v: float, a: float, t_h: float) -> float:
    """Distance covered over ``t_h`` at constant acceleration, never reversing."""
    if a < 0 and v + a * t_h < 0:
        return v * v / (-2.0 * a)
    return max(0.0, v * t_h + 0.5 * a * t_h * t_h)


def _snap(graph: RoadGraph, ob: ObstacleState, max_dist: float) -> Optional[int]:
    near = [(d, i) for d, i in graph.nearest((ob.x, ob.y), k=8) if d <= max_dist]
    if not near:
        return None
    for d, i in near:
        if abs(wrap_angle(graph.heading[i] - ob.yaw)) < math.pi / 2:
            return i
    return near[0][1]


def predict_all(obstacles: Sequence[ObstacleState], graph: Optional[RoadGraph], t_h: float = 5.0,
                dt: float = 0.1, tol: Optional[float] = None, max_snap: float = 10.0,
                v_cap: float = math.inf) -> List[PredictedTrajectory]:
    """Predictions for all obstacles, ordered by obstacle id then path order.

    Vehicles follow every breadth-first path of their expected travel
    distance; pedestrians, static objects and vehicles more than
    ``max_snap`` from the graph move at constant velocity.
    """
    out: List[PredictedTrajectory] = []
    for ob in sorted(obstacles, key=lambda o: str(o.id)):
        if ob.kind != "vehicle" or graph is None:
            out.append(constant_velocity_prediction(ob, t_h, dt))
            continue
        node = _snap(graph, ob, max_snap)
        desired = travel_distance(ob.v, ob.a, t_h)
        if node is None or desired <= 0.0:
            out.append(constant_velocity_prediction(ob, t_h, dt))
            continue
        paths = extract_paths(graph, node, desired, graph.ds if tol is None else tol)
        if not paths:
            out.append(constant_velocity_prediction(ob, t_h, dt))
            continue
        for pid, path in enumerate(paths):
            out.append(pure_pursuit_rollout(ob, graph.xy[path], t_h, dt, v_cap=v_cap, path_id=pid))
    return out
