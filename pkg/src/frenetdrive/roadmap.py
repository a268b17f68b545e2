"""Lane-graph map format.

A map is a JSON document::

    {
      "roads": [{"id": "r0", "waypoints": [[x, y], ...], "lane_width": 3.5,
                 "successors": ["r1"]}],
      "traffic_controls": [{"id": "tl0", "kind": "light", "road_id": "r0", "s": 80.0,
                            "phases": {"green": 10, "yellow": 3, "red": 10, "offset": 0}}],
      "route": {"roads": ["r0", "r1"], "start": {"x": 0, "y": 0, "yaw": 0},
                "goal": {"x": 150, "y": 0}}
    }

Lengths are metres, angles radians.  ``kind`` is ``"light"`` or
``"stop_sign"``; stop signs carry no phases.  An optional ``"origin":
{"lat": .., "lon": ..}`` anchors the local frame for GNSS simulation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import ScenarioError


@dataclass(frozen=True)
class Road:
    id: str
    waypoints: Tuple[Tuple[float, float], ...]
    lane_width: float = 3.5
    successors: Tuple[str, ...] = ()

    @property
    def length(self) -> float:
        pts = np.asarray(self.waypoints)
        return float(np.hypot(*np.diff(pts, axis=0).T).sum())

    def point_at(self, s: float) -> Tuple[float, float]:
        """Point at arc length ``s`` along the waypoint polyline."""
        pts = np.asarray(self.waypoints)
        cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
        return float(np.interp(s, cum, pts[:, 0])), float(np.interp(s, cum, pts[:, 1]))


@dataclass(frozen=True)
class LightPhases:
    green: float
    yellow: float
    red: float
    offset: float = 0.0

    @property
    def cycle(self) -> float:
        return self.green + self.yellow + self.red

    def state_at(self, t: float) -> str:
        """Phase at time ``t``: the cycle runs green, yellow, red from ``-offset``."""
        tau = math.fmod(t + self.offset, self.cycle)
        if tau < 0:
            tau += self.cycle
        if tau < self.green:
            return "green"
        if tau < self.green + self.yellow:
            return "yellow"
        return "red"


@dataclass(frozen=True)
class TrafficControl:
    id: str
    kind: str
    road_id: str
    s: float
    phases: Optional[LightPhases] = None

    def state_at(self, t: float) -> str:
        return self.phases.state_at(t) if self.kind == "light" else "stop_sign"


@dataclass(frozen=True)
class Route:
    roads: Tuple[str, ...]
    start: Tuple[float, float, float]
    goal: Tuple[float, float]


@dataclass
class WorldMap:
    roads: List[Road]
    traffic_controls: List[TrafficControl] = field(default_factory=list)
    route: Optional[Route] = None
    origin: Tuple[float, float] = (0.0, 0.0)

    def road(self, road_id: str) -> Road:
        for r in self.roads:
            if r.id == road_id:
                return r
        raise KeyError(road_id)

    def route_waypoints(self) -> List[Tuple[float, float]]:
        """Route roads' waypoints chained, with coincident junction points merged."""
        pts: List[Tuple[float, float]] = []
        for rid in self.route.roads:
            for p in self.road(rid).waypoints:
                if pts and math.hypot(p[0] - pts[-1][0], p[1] - pts[-1][1]) < 1e-6:
                    continue
                pts.append(tuple(p))
        return pts


def _field(obj, key, where, kind=None, default=...):
    if key not in obj:
        if default is ...:
            raise ScenarioError(f"{where}: missing field '{key}'")
        return default
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise ScenarioError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def _num(val, where) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ScenarioError(f"{where}: expected a finite number, got {val!r}")
    return float(val)


def _points(val, where) -> Tuple[Tuple[float, float], ...]:
    if not isinstance(val, list) or not val:
        raise ScenarioError(f"{where}: expected a non-empty list of [x, y]")
    out = []
    for i, p in enumerate(val):
        if not isinstance(p, list) or len(p) != 2:
            raise ScenarioError(f"{where}[{i}]: expected [x, y], got {p!r}")
        out.append((_num(p[0], f"{where}[{i}][0]"), _num(p[1], f"{where}[{i}][1]")))
    return tuple(out)


def map_from_dict(doc: dict, where: str = "map") -> WorldMap:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{where}: expected an object")
    roads = []
    raw_roads = _field(doc, "roads", where, list)
    if not raw_roads:
        raise ScenarioError(f"{where}.roads: at least one road is required")
    for i, r in enumerate(raw_roads):
        w = f"{where}.roads[{i}]"
        if not isinstance(r, dict):
            raise ScenarioError(f"{w}: expected an object")
        wps = _points(_field(r, "waypoints", w), f"{w}.waypoints")
        if len(wps) < 2:
            raise ScenarioError(f"{w}.waypoints: need at least two points")
        roads.append(Road(
            id=str(_field(r, "id", w)),
            waypoints=wps,
            lane_width=_num(_field(r, "lane_width", w, default=3.5), f"{w}.lane_width"),
            successors=tuple(str(s) for s in _field(r, "successors", w, list, default=[])),
        ))
    ids = {r.id for r in roads}
    if len(ids) != len(roads):
        raise ScenarioError(f"{where}.roads: duplicate road ids")
    for i, r in enumerate(roads):
        for s in r.successors:
            if s not in ids:
                raise ScenarioError(f"{where}.roads[{i}].successors: unknown road '{s}'")

    controls = []
    for i, c in enumerate(_field(doc, "traffic_controls", where, list, default=[])):
        w = f"{where}.traffic_controls[{i}]"
        kind = _field(c, "kind", w, str)
        if kind not in ("light", "stop_sign"):
            raise ScenarioError(f"{w}.kind: expected 'light' or 'stop_sign', got {kind!r}")
        road_id = str(_field(c, "road_id", w))
        if road_id not in ids:
            raise ScenarioError(f"{w}.road_id: unknown road '{road_id}'")
        s = _num(_field(c, "s", w), f"{w}.s")
        road_len = next(r for r in roads if r.id == road_id).length
        if not 0 <= s <= road_len + 1e-9:
            raise ScenarioError(f"{w}.s: {s} outside road length {road_len:.3f}")
        phases = None
        if kind == "light":
            ph = _field(c, "phases", w, dict)
            vals = {k: _num(_field(ph, k, f"{w}.phases"), f"{w}.phases.{k}") for k in ("green", "yellow", "red")}
            if min(vals.values()) <= 0:
                raise ScenarioError(f"{w}.phases: durations must be positive")
            phases = LightPhases(offset=_num(ph.get("offset", 0.0), f"{w}.phases.offset"), **vals)
        controls.append(TrafficControl(str(_field(c, "id", w)), kind, road_id, s, phases))

    route = None
    if "route" in doc:
        w = f"{where}.route"
        rt = _field(doc, "route", where, dict)
        rroads = tuple(str(x) for x in _field(rt, "roads", w, list))
        if not rroads:
            raise ScenarioError(f"{w}.roads: empty route")
        for x in rroads:
            if x not in ids:
                raise ScenarioError(f"{w}.roads: unknown road '{x}'")
        st = _field(rt, "start", w, dict)
        gl = _field(rt, "goal", w, dict)
        route = Route(
            roads=rroads,
            start=(_num(_field(st, "x", f"{w}.start"), f"{w}.start.x"), _num(_field(st, "y", f"{w}.start"), f"{w}.start.y"),
                   _num(st.get("yaw", 0.0), f"{w}.start.yaw")),
            goal=(_num(_field(gl, "x", f"{w}.goal"), f"{w}.goal.x"), _num(_field(gl, "y", f"{w}.goal"), f"{w}.goal.y")),
        )
    origin = (0.0, 0.0)
    if "origin" in doc:
        o = _field(doc, "origin", where, dict)
        origin = (_num(_field(o, "lat", f"{where}.origin"), "origin.lat"), _num(_field(o, "lon", f"{where}.origin"), "origin.lon"))
    return WorldMap(roads=roads, traffic_controls=controls, route=route, origin=origin)


def load_json(path) -> dict:
    """Parse a JSON file, reporting syntax errors with line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_map(path) -> WorldMap:
    return map_from_dict(load_json(path), where=str(path))
