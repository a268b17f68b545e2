"""Run configuration.

A config file is YAML (JSON is accepted too, being a subset).  Every key
is optional; an empty file gives the defaults below.  Sections::

    weights:      k_j, k_t, k_s, k_lat, k_lon
    grid:         delta_d, n_d, delta_T, T_min, T_max, delta_v, n_v, delta_s, n_s
    limits:       J_max, a_max, v_max, kappa_max, kappa_min_speed
    planner:      dt, replan_interval, D0, tau, pairing, stop_margin, reference_ds
    prediction:   horizon, graph_ds, max_snap
    localization: q, gnss_sigma, compass_sigma, imu_sigma, stitch_tolerance
    perception:   range, traffic_range, position_sigma, velocity_sigma, dropout
    collision:    pedestrian_radius
    infractions:  pedestrian, vehicle, layout, red_light, route_deviation, blocked,
                  deviation_threshold, blocked_time, blocked_speed, dedupe_window
    sim:          dt, goal_tolerance, stop_sign_speed, stop_sign_window
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Tuple

import yaml

from .errors import ScenarioError
from .planner import ComfortLimits, CostWeights, SamplingGrid


@dataclass(frozen=True)
class PlannerSettings:
    dt: float = 0.1
    replan_interval: float = 0.1
    D0: float = 5.0
    tau: float = 1.0
    pairing: str = "matched"
    #: stop this far short of a stop line, measured at the front bumper
    stop_margin: float = 0.5
    reference_ds: float = 0.5


@dataclass(frozen=True)
class PredictionSettings:
    horizon: float = 5.0
    graph_ds: float = 1.0
    max_snap: float = 10.0


@dataclass(frozen=True)
class LocalizationSettings:
    q: Tuple[float, ...] = (0.01, 0.01, 0.001, 0.1, 0.5)
    gnss_sigma: float = 0.5
    compass_sigma: float = 0.05
    imu_sigma: float = 0.1
    #: keep planning from the previous plan while the estimate stays this close
    stitch_tolerance: float = 2.0


@dataclass(frozen=True)
class PerceptionSettings:
    range: float = 50.0
    traffic_range: float = 40.0
    position_sigma: float = 0.0
    velocity_sigma: float = 0.0
    dropout: float = 0.0


@dataclass(frozen=True)
class CollisionSettings:
    pedestrian_radius: float = 0.4


@dataclass(frozen=True)
class InfractionSettings:
    pedestrian: float = 0.50
    vehicle: float = 0.60
    layout: float = 0.65
    red_light: float = 0.70
    route_deviation: float = 1.0
    blocked: float = 1.0
    deviation_threshold: float = 30.0
    blocked_time: float = 180.0
    blocked_speed: float = 0.1
    dedupe_window: float = 2.0


@dataclass(frozen=True)
class SimSettings:
    dt: float = 0.1
    goal_tolerance: float = 2.0
    stop_sign_speed: float = 0.1
    stop_sign_window: float = 2.0


@dataclass(frozen=True)
class Config:
    weights: CostWeights = field(default_factory=CostWeights)
    grid: SamplingGrid = field(default_factory=SamplingGrid)
    limits: ComfortLimits = field(default_factory=ComfortLimits)
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    prediction: PredictionSettings = field(default_factory=PredictionSettings)
    localization: LocalizationSettings = field(default_factory=LocalizationSettings)
    perception: PerceptionSettings = field(default_factory=PerceptionSettings)
    collision: CollisionSettings = field(default_factory=CollisionSettings)
    infractions: InfractionSettings = field(default_factory=InfractionSettings)
    sim: SimSettings = field(default_factory=SimSettings)

    def replace(self, **sections) -> "Config":
        return dataclasses.replace(self, **sections)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ScenarioError(f"config.{name}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in raw.items():
        if key not in known:
            raise ScenarioError(f"config.{name}.{key}: unknown key")
        default = known[key].default
        if isinstance(default, tuple):
            val = tuple(float(v) for v in val)
        elif isinstance(default, bool) or isinstance(default, str):
            pass
        elif isinstance(default, int) and not isinstance(default, bool):
            if not isinstance(val, int) or isinstance(val, bool):
                raise ScenarioError(f"config.{name}.{key}: expected an integer, got {val!r}")
        elif isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ScenarioError(f"config.{name}.{key}: expected a number, got {val!r}")
        else:
            val = float(val)
        kwargs[key] = val
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"config.{name}: {exc}") from exc


def config_from_dict(doc) -> Config:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ScenarioError("config: expected a mapping at top level")
    fields = {f.name: f for f in dataclasses.fields(Config)}
    for key in doc:
        if key not in fields:
            raise ScenarioError(f"config.{key}: unknown section")
    out = {}
    for name, f in fields.items():
        out[name] = _section(f.default_factory().__class__, doc.get(name), name)
    return Config(**out)


def load_config(path=None) -> Config:
    """Load a config file; ``None`` gives the defaults."""
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ScenarioError(f"{where}: {getattr(exc, 'problem', exc)}") from exc
    return config_from_dict(doc)
