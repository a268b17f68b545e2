"""Closed-loop simulation: world, infractions, metrics and the runner."""

from .infractions import InfractionDetector, InfractionEvent, detect_infractions
from .metrics import MetricsReport, aggregate, compute_metrics
from .runner import RunResult, run_scenario, write_outputs
from .world import (EgoState, ObstacleScript, Scenario, TrafficControlObservation, WorldState, initial_world,
                    load_scenario, perceive, scenario_from_dict, step)
