"""Infraction detection on ground truth.

Collisions use the exact rectangle overlap test on true footprints, not
the planner's disk cover, so a disk-model miss would show up here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..collision import rectangles_overlap
from ..config import InfractionSettings
from ..prediction import ObstacleState

COLLISION_TYPES = {
    "pedestrian": "collision_pedestrian",
    "vehicle": "collision_vehicle",
    "static": "collision_layout",
}
TERMINAL_TYPES = ("collision_pedestrian", "collision_vehicle", "collision_layout", "blocked")


@dataclass(frozen=True)
class InfractionEvent:
    type: str
    time: float
    position: Tuple[float, float]
    counterpart: str = ""

    def to_dict(self) -> dict:
        return {"type": self.type, "time": round(self.time, 6),
                "position": [round(self.position[0], 6), round(self.position[1], 6)],
                "counterpart": self.counterpart}


def coefficient(event_type: str, settings: InfractionSettings) -> float:
    key = {
        "collision_pedestrian": "pedestrian",
        "collision_vehicle": "vehicle",
        "collision_layout": "layout",
        "red_light": "red_light",
        "route_deviation": "route_deviation",
        "blocked": "blocked",
    }[event_type]
    return float(getattr(settings, key))


@dataclass
class InfractionDetector:
    """Stateful per-run detector; call :meth:`update` once per world step.

    Events of the same type against the same counterpart are reported at
    most once per ``dedupe_window`` seconds.
    """

    settings: InfractionSettings = field(default_factory=InfractionSettings)
    events: List[InfractionEvent] = field(default_factory=list)
    _last: Dict[Tuple[str, str], float] = field(default_factory=dict)
    _still_since: Optional[float] = None
    _prev_front_s: Optional[float] = None

    def _emit(self, etype, t, pos, counterpart="") -> Optional[InfractionEvent]:
        key = (etype, counterpart)
        last = self._last.get(key)
        if last is not None and t - last < self.settings.dedupe_window - 1e-9:
            return None
        self._last[key] = t
        ev = InfractionEvent(etype, t, (float(pos[0]), float(pos[1])), counterpart)
        self.events.append(ev)
        return ev

    def check_collisions(self, t, ego_pose, ego_dims, obstacles: Sequence[ObstacleState]) -> List[InfractionEvent]:
        out = []
        for ob in obstacles:
            if rectangles_overlap(ego_pose, ego_dims, (ob.x, ob.y, ob.yaw), ob.dims):
                ev = self._emit(COLLISION_TYPES.get(ob.kind, "collision_vehicle"), t, ego_pose[:2], str(ob.id))
                if ev:
                    out.append(ev)
        return out

    def check_red_lights(self, t, ego_pos, front_s: float, lines: Sequence[Tuple[str, float, str]]):
        """``lines`` holds ``(control_id, stop_line_s, phase)`` on the route reference.

        An event fires when the front bumper crosses a line whose light is red.
        """
        out = []
        prev = self._prev_front_s
        self._prev_front_s = front_s
        if prev is None:
            return out
        for cid, s_line, phase in lines:
            if phase == "red" and prev < s_line <= front_s:
                ev = self._emit("red_light", t, ego_pos, cid)
                if ev:
                    out.append(ev)
        return out

    def check_deviation(self, t, ego_pos, lateral_offset: float):
        if abs(lateral_offset) > self.settings.deviation_threshold:
            ev = self._emit("route_deviation", t, ego_pos, "route")
            return [ev] if ev else []
        return []

    def check_blocked(self, t, ego_pos, speed: float):
        """Blocked once the speed has stayed below the threshold for ``blocked_time``.

        The clock restarts after an event, so one standstill reports once
        per ``blocked_time``.
        """
        if speed >= self.settings.blocked_speed:
            self._still_since = None
            return []
        if self._still_since is None:
            self._still_since = t
            return []
        if t - self._still_since >= self.settings.blocked_time - 1e-9:
            self._still_since = t
            ev = self._emit("blocked", t, ego_pos, "ego")
            return [ev] if ev else []
        return []

    def update(self, t, ego_pose, ego_speed, ego_dims, obstacles, front_s=None, lines=(),
               lateral_offset=0.0) -> List[InfractionEvent]:
        out = self.check_collisions(t, ego_pose, ego_dims, obstacles)
        if front_s is not None:
            out += self.check_red_lights(t, ego_pose[:2], front_s, lines)
        out += self.check_deviation(t, ego_pose[:2], lateral_offset)
        out += self.check_blocked(t, ego_pose[:2], ego_speed)
        return out


def detect_infractions(world, detector: InfractionDetector, ego_dims, front_s=None, lines=(),
                       lateral_offset=0.0) -> List[InfractionEvent]:
    """New events for the current world state."""
    e = world.ego
    return detector.update(world.t, (e.x, e.y, e.theta), e.v, ego_dims, world.obstacles(),
                           front_s, lines, lateral_offset)
