"""Route completion, infraction penalty and driving score."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

from ..config import InfractionSettings
from ..errors import InputError
from .infractions import InfractionEvent, coefficient

TERMINATIONS = ("goal", "collision_stop", "blocked", "timeout")


@dataclass
class MetricsReport:
    route_completion: float
    infraction_penalty: float
    driving_score: float
    infraction_events: List[dict]
    termination: str
    route_length: float = 0.0
    distance_driven: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def compute_metrics(route_length: float, events: Sequence[InfractionEvent], distance_completed: float,
                    settings: InfractionSettings = InfractionSettings(), termination: str = "timeout",
                    distance_driven: float = 0.0) -> MetricsReport:
    """Score one route.

    The penalty multiplies one coefficient per event and is clamped to
    ``[0, 1]``; the driving score is completion (%) times penalty.
    """
    if route_length <= 0:
        raise InputError("route length must be positive")
    if distance_completed < 0 or distance_completed > route_length + 1e-9:
        raise InputError(f"completed distance {distance_completed} outside [0, {route_length}]")
    if termination not in TERMINATIONS:
        raise InputError(f"unknown termination {termination!r}")
    completion = 100.0 * min(distance_completed, route_length) / route_length
    penalty = 1.0
    for ev in events:
        penalty *= coefficient(ev.type, settings)
    penalty = min(1.0, max(0.0, penalty))
    return MetricsReport(
        route_completion=completion,
        infraction_penalty=penalty,
        driving_score=completion * penalty,
        infraction_events=[ev.to_dict() for ev in events],
        termination=termination,
        route_length=float(route_length),
        distance_driven=float(distance_driven),
    )


def aggregate(reports: Sequence[MetricsReport]) -> Dict[str, object]:
    """Suite summary: per-route means plus infractions per km driven, by type."""
    if not reports:
        raise InputError("nothing to aggregate")
    km = sum(r.distance_driven for r in reports) / 1000.0
    counts = Counter(ev["type"] for r in reports for ev in r.infraction_events)
    per_km = {k: (counts[k] / km if km > 0 else float("nan")) for k in sorted(counts)}
    return {
        "n_routes": len(reports),
        "driving_score": float(np.mean([r.driving_score for r in reports])),
        "route_completion": float(np.mean([r.route_completion for r in reports])),
        "infraction_penalty": float(np.mean([r.infraction_penalty for r in reports])),
        "distance_driven_km": km,
        "infractions_per_km": per_km,
    }
