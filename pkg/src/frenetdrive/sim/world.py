"""Scenario description and world state for closed-loop runs.

A scenario file is JSON::

    {
      "name": "red_light",
      "map": "maps/straight_light.json",       # path relative to this file, or an inline map
      "time_limit": 60.0,
      "ego": {"dims": [2.0, 4.5], "initial_speed": 0.0, "speed_limit": 10.0},
      "obstacles": [
        {"id": "ped0", "kind": "pedestrian", "dims": [0.6, 0.6],
         "path": [[60, -8], [60, 8]], "speed_profile": [[0, 1.4]], "spawn_time": 0.0}
      ],
      "perception": {"range": 50, "position_sigma": 0.0, "dropout": 0.0},
      "localization": {"gnss_sigma": 0.5},
      "merge_zones": [[40.0, 90.0]]
    }

``kind`` is ``vehicle``, ``pedestrian`` or ``static``.  Speed profiles are
piecewise linear in time since spawn and held past their last point;
obstacles stop at the end of their path.  ``perception`` and
``localization`` blocks override the matching config sections.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ScenarioError
from ..frenet import ReferenceLine
from ..prediction import ObstacleState
from ..roadmap import WorldMap, _num, _points, load_json, map_from_dict

OBSTACLE_KINDS = ("vehicle", "pedestrian", "static")


@dataclass(frozen=True)
class ObstacleScript:
    id: str
    kind: str
    dims: Tuple[float, float]
    path: np.ndarray  # (n, 2)
    speed_profile: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    spawn_time: float = 0.0

    def __post_init__(self):
        path = np.asarray(self.path, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "path", path)
        seg = np.hypot(*np.diff(path, axis=0).T) if len(path) > 1 else np.zeros(0)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))
        prof = np.asarray(self.speed_profile, dtype=float).reshape(-1, 2)
        if self.kind == "static":
            prof = np.zeros((1, 2))
        object.__setattr__(self, "_prof", prof)
        # distance travelled at each profile breakpoint (trapezoids)
        if len(prof) > 1:
            dist = np.concatenate([[0.0], np.cumsum(np.diff(prof[:, 0]) * 0.5 * (prof[1:, 1] + prof[:-1, 1]))])
        else:
            dist = np.zeros(1)
        object.__setattr__(self, "_prof_dist", dist)

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def _speed(self, tau: float) -> float:
        prof = self._prof
        return float(np.interp(tau, prof[:, 0], prof[:, 1]))

    def _accel(self, tau: float) -> float:
        prof = self._prof
        if len(prof) < 2 or tau < prof[0, 0] or tau >= prof[-1, 0]:
            return 0.0
        k = int(np.searchsorted(prof[:, 0], tau, side="right")) - 1
        return float((prof[k + 1, 1] - prof[k, 1]) / (prof[k + 1, 0] - prof[k, 0]))

    def _distance(self, tau: float) -> float:
        """Arc length covered ``tau`` seconds after spawning."""
        prof, dist = self._prof, self._prof_dist
        if tau <= 0.0:
            return 0.0
        t0 = prof[0, 0]
        if tau <= t0:
            return prof[0, 1] * tau
        lead = prof[0, 1] * t0
        if tau >= prof[-1, 0]:
            return lead + dist[-1] + prof[-1, 1] * (tau - prof[-1, 0])
        k = int(np.searchsorted(prof[:, 0], tau, side="right")) - 1
        v0, v1 = prof[k, 1], self._speed(tau)
        return lead + dist[k] + 0.5 * (v0 + v1) * (tau - prof[k, 0])

    def present(self, t: float) -> bool:
        return t >= self.spawn_time - 1e-9

    def state_at(self, t: float) -> ObstacleState:
        """Ground-truth state at world time ``t`` (spawned obstacles only)."""
        tau = t - self.spawn_time
        s = min(self._distance(tau), self.length)
        at_end = s >= self.length - 1e-9 and len(self.path) > 1 and self._distance(tau) > self.length
        path, cum = self.path, self._cum
        if len(path) == 1:
            x, y, yaw = path[0, 0], path[0, 1], 0.0
        else:
            k = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(path) - 2))
            seg = cum[k + 1] - cum[k]
            w = (s - cum[k]) / seg if seg > 0 else 0.0
            p = path[k] + w * (path[k + 1] - path[k])
            x, y = p
            yaw = math.atan2(path[k + 1, 1] - path[k, 1], path[k + 1, 0] - path[k, 0])
        moving = self.kind != "static" and not at_end
        v = self._speed(tau) if moving else 0.0
        a = self._accel(tau) if moving else 0.0
        return ObstacleState(self.id, self.kind, float(x), float(y), float(yaw), float(v), float(a), self.dims)


@dataclass(frozen=True)
class EgoSpec:
    dims: Tuple[float, float] = (2.0, 4.5)
    initial_speed: float = 0.0
    speed_limit: Optional[float] = None


@dataclass
class Scenario:
    name: str
    world_map: WorldMap
    time_limit: float
    ego: EgoSpec
    obstacles: List[ObstacleScript]
    perception: Dict[str, float] = field(default_factory=dict)
    localization: Dict[str, float] = field(default_factory=dict)
    merge_zones: List[Tuple[float, float]] = field(default_factory=list)


def _obstacle(raw, where) -> ObstacleScript:
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected an object")
    if "id" not in raw:
        raise ScenarioError(f"{where}: missing field 'id'")
    kind = raw.get("kind", "vehicle")
    if kind not in OBSTACLE_KINDS:
        raise ScenarioError(f"{where}.kind: expected one of {OBSTACLE_KINDS}, got {kind!r}")
    default_dims = (0.6, 0.6) if kind == "pedestrian" else (2.0, 4.5)
    dims = raw.get("dims", list(default_dims))
    if not isinstance(dims, list) or len(dims) != 2:
        raise ScenarioError(f"{where}.dims: expected [w, l]")
    dims = (_num(dims[0], f"{where}.dims[0]"), _num(dims[1], f"{where}.dims[1]"))
    if min(dims) <= 0:
        raise ScenarioError(f"{where}.dims: must be positive")
    if "path" not in raw:
        raise ScenarioError(f"{where}: missing field 'path'")
    path = _points(raw["path"], f"{where}.path")
    prof = raw.get("speed_profile", [[0.0, 0.0]])
    if not isinstance(prof, list) or not prof:
        raise ScenarioError(f"{where}.speed_profile: expected a non-empty list of [t, v]")
    prof = _points(prof, f"{where}.speed_profile")
    times = [p[0] for p in prof]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ScenarioError(f"{where}.speed_profile: times must increase strictly")
    if any(p[1] < 0 for p in prof):
        raise ScenarioError(f"{where}.speed_profile: speeds must be >= 0")
    spawn = _num(raw.get("spawn_time", 0.0), f"{where}.spawn_time")
    return ObstacleScript(str(raw["id"]), kind, dims, np.array(path), prof, spawn)


def scenario_from_dict(doc, base_dir: Path = Path("."), where: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: expected an object")
    if "map" not in doc:
        raise ScenarioError(f"{where}: missing field 'map'")
    m = doc["map"]
    if isinstance(m, str):
        map_path = (base_dir / m)
        world_map = map_from_dict(load_json(map_path), where=str(map_path))
    else:
        world_map = map_from_dict(m, where=f"{where}.map")
    if world_map.route is None:
        raise ScenarioError(f"{where}.map: a route is required")
    time_limit = _num(doc.get("time_limit", 60.0), f"{where}.time_limit")
    if time_limit <= 0:
        raise ScenarioError(f"{where}.time_limit: must be positive")
    e = doc.get("ego", {})
    if not isinstance(e, dict):
        raise ScenarioError(f"{where}.ego: expected an object")
    dims = e.get("dims", [2.0, 4.5])
    if not isinstance(dims, list) or len(dims) != 2:
        raise ScenarioError(f"{where}.ego.dims: expected [w, l]")
    limit = e.get("speed_limit")
    ego = EgoSpec(
        dims=(_num(dims[0], f"{where}.ego.dims[0]"), _num(dims[1], f"{where}.ego.dims[1]")),
        initial_speed=_num(e.get("initial_speed", 0.0), f"{where}.ego.initial_speed"),
        speed_limit=None if limit is None else _num(limit, f"{where}.ego.speed_limit"),
    )
    raw_obs = doc.get("obstacles", [])
    if not isinstance(raw_obs, list):
        raise ScenarioError(f"{where}.obstacles: expected a list")
    obstacles = [_obstacle(o, f"{where}.obstacles[{i}]") for i, o in enumerate(raw_obs)]
    if len({o.id for o in obstacles}) != len(obstacles):
        raise ScenarioError(f"{where}.obstacles: duplicate ids")
    sections = {}
    for key in ("perception", "localization"):
        block = doc.get(key, {})
        if not isinstance(block, dict):
            raise ScenarioError(f"{where}.{key}: expected an object")
        sections[key] = block
    zones = []
    for i, z in enumerate(doc.get("merge_zones", [])):
        if not isinstance(z, list) or len(z) != 2:
            raise ScenarioError(f"{where}.merge_zones[{i}]: expected [s_start, s_end]")
        zones.append((_num(z[0], f"{where}.merge_zones[{i}][0]"), _num(z[1], f"{where}.merge_zones[{i}][1]")))
    return Scenario(str(doc.get("name", "scenario")), world_map, time_limit, ego, obstacles,
                    sections["perception"], sections["localization"], zones)


def load_scenario(path) -> Scenario:
    path = Path(path)
    doc = load_json(path)
    return scenario_from_dict(doc, base_dir=path.parent, where=str(path))


# --- runtime state -----------------------------------------------------------

@dataclass
class EgoState:
    x: float
    y: float
    theta: float
    v: float
    a: float = 0.0
    kappa: float = 0.0

    @property
    def pose(self) -> Tuple[float, float, float]:
        return self.x, self.y, self.theta


@dataclass(frozen=True)
class TrafficControlObservation:
    """A traffic control as seen from the ego.

    ``P_ego`` is the stop-line point in the ego body frame (x forward,
    y left); ``stop_line_s`` is measured along the ego's reference.
    """

    id: str
    P_ego: Tuple[float, float]
    S_sign: str
    stop_line_s: float


@dataclass
class WorldState:
    scenario: Scenario
    ego: EgoState
    t: float = 0.0

    @property
    def world_map(self) -> WorldMap:
        return self.scenario.world_map

    def obstacles(self) -> List[ObstacleState]:
        """Ground-truth states of all spawned obstacles."""
        return [o.state_at(self.t) for o in self.scenario.obstacles if o.present(self.t)]

    def light_state(self, control_id: str) -> str:
        for c in self.world_map.traffic_controls:
            if c.id == control_id:
                return c.state_at(self.t)
        raise KeyError(control_id)


def initial_world(scenario: Scenario) -> WorldState:
    x, y, yaw = scenario.world_map.route.start
    return WorldState(scenario, EgoState(x, y, yaw, scenario.ego.initial_speed))


def step(world: WorldState, command, dt: float, a_max: float = 5.0, t_command: float = 0.0) -> WorldState:
    """Advance the world by ``dt``.

    ``command`` is a :class:`Trajectory` planned at world time
    ``t_command``, which the ego samples at the new time, or ``None`` for an
    emergency stop at ``a_max`` along the current heading.  Obstacles and
    light phases are pure functions of time, so only the clock and the
    ego move.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t_new = world.t + dt
    e = world.ego
    if command is None:
        v_new = max(0.0, e.v - a_max * dt)
        # distance under constant deceleration, stopping early if needed
        t_stop = e.v / a_max if a_max > 0 else math.inf
        tau = min(dt, t_stop)
        dist = e.v * tau - 0.5 * a_max * tau * tau
        ego = EgoState(e.x + dist * math.cos(e.theta), e.y + dist * math.sin(e.theta), e.theta, v_new,
                       -a_max if e.v > 0 else 0.0, 0.0)
    else:
        x, y, th, v, a, k = command.state_at(t_new - t_command)
        ego = EgoState(x, y, th, v, a, k)
    return WorldState(world.scenario, ego, t_new)


def perceive(world: WorldState, ref: ReferenceLine, rng: Optional[np.random.Generator] = None,
             sensing_range: float = 50.0, traffic_range: float = 40.0, position_sigma: float = 0.0,
             velocity_sigma: float = 0.0, dropout: float = 0.0, ego_s: Optional[float] = None,
             control_s: Optional[Dict[str, float]] = None):
    """Oracle perception.

    Returns ``(obstacles, traffic)``.  Obstacles within ``sensing_range``
    of the ego are reported, each dropped with probability ``dropout``
    and perturbed by Gaussian noise.  Traffic controls on the route whose
    stop line lies ahead of the ego within ``traffic_range`` are reported
    with their current phase.  ``control_s`` maps control ids to stop-line
    positions on ``ref``.
    """
    e = world.ego
    out = []
    for ob in world.obstacles():
        if math.hypot(ob.x - e.x, ob.y - e.y) > sensing_range:
            continue
        if rng is not None and dropout > 0.0 and rng.random() < dropout:
            continue
        if rng is not None and (position_sigma > 0.0 or velocity_sigma > 0.0):
            dx, dy = rng.normal(0.0, position_sigma, 2) if position_sigma > 0 else (0.0, 0.0)
            dv = rng.normal(0.0, velocity_sigma) if velocity_sigma > 0 else 0.0
            v = ob.v if ob.kind == "static" else max(0.0, ob.v + dv)
            ob = dataclasses.replace(ob, x=ob.x + dx, y=ob.y + dy, v=v)
        out.append(ob)

    traffic = []
    if control_s:
        if ego_s is None:
            ego_s = ref.project(e.x, e.y)[0]
        c, s = math.cos(e.theta), math.sin(e.theta)
        for ctl in world.world_map.traffic_controls:
            if ctl.id not in control_s:
                continue
            s_line = control_s[ctl.id]
            if not (0.0 <= s_line - ego_s <= traffic_range):
                continue
            lx, ly, _, _, _ = (float(q) for q in ref.interpolate(s_line))
            rx, ry = lx - e.x, ly - e.y
            traffic.append(TrafficControlObservation(ctl.id, (c * rx + s * ry, -s * rx + c * ry),
                                                     ctl.state_at(world.t), s_line))
    return out, traffic
