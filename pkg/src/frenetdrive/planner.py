"""Sampling-based Frenet planner.

For the active driving mode a family of terminal conditions is sampled on
the longitudinal axis, a family of lateral offsets on the lateral axis,
and every (lateral, longitudinal) pair is realised in Cartesian space.
Pairs that break comfort or kinematic limits are dropped, the rest are
collision-checked against the predicted obstacles, and the cheapest
survivor is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .collision import filter_collision_free
from .errors import InputError, NoFeasibleTrajectory
from .frenet import CandidateSet, FrenetState, ReferenceLine, Trajectory, frenet_arrays_to_cartesian, time_grid
from .polynomial import MotionPoly, jerk_integral, max_abs_jerk_many, sample_many, solve_quartic, solve_quintic

MODES = ("stopping", "following", "merging", "velocity_keeping")


@dataclass(frozen=True)
class TerminalCondition:
    """Target end state of one sampled profile.

    ``target`` is ``(s, s_dot, s_ddot)`` (or ``(d, d_dot, d_ddot)``) for
    position-constrained conditions and ``(s_dot, s_ddot)`` for
    velocity-constrained ones.
    """

    kind: str
    target: Tuple[float, ...]
    T: float
    mode: str

    def __post_init__(self):
        if not self.T > 0:
            raise InputError("terminal horizon must be positive")
        expected = 3 if self.kind == "position" else 2
        if self.kind not in ("position", "velocity") or len(self.target) != expected:
            raise InputError(f"bad terminal condition {self.kind} {self.target}")


@dataclass(frozen=True)
class CostWeights:
    k_j: float = 0.1
    k_t: float = 0.1
    k_s: float = 1.0
    k_lat: float = 1.0
    k_lon: float = 1.0

    def __post_init__(self):
        vals = (self.k_j, self.k_t, self.k_s, self.k_lat, self.k_lon)
        if any(v < 0 for v in vals) or not any(v > 0 for v in vals):
            raise InputError("cost weights must be >= 0 and not all zero")

    def scaled(self, c: float) -> "CostWeights":
        return CostWeights(self.k_j * c, self.k_t * c, self.k_s * c, self.k_lat * c, self.k_lon * c)


@dataclass(frozen=True)
class SamplingGrid:
    delta_d: float = 1.0
    n_d: int = 3
    delta_T: float = 0.2
    T_min: float = 2.0
    T_max: float = 5.0
    delta_v: float = 1.38
    n_v: int = 2
    delta_s: float = 2.0
    n_s: int = 3

    def __post_init__(self):
        if min(self.delta_d, self.delta_T, self.delta_v, self.delta_s) <= 0:
            raise InputError("grid deltas must be positive")
        if self.T_min < 0.5 or self.T_max > 10 or self.T_min > self.T_max:
            raise InputError("grid horizons must satisfy 0.5 <= T_min <= T_max <= 10")

    def horizons(self) -> List[float]:
        n = int(math.floor((self.T_max - self.T_min) / self.delta_T + 1e-9))
        return [round(self.T_min + i * self.delta_T, 9) for i in range(n + 1)]

    def lateral_offsets(self) -> List[float]:
        return [k * self.delta_d for k in range(-self.n_d, self.n_d + 1)]


@dataclass(frozen=True)
class ComfortLimits:
    J_max: float = 10.0
    a_max: float = 5.0
    v_max: float = 10.0
    kappa_max: float = 0.3
    #: curvature is only limited above this speed; heading is ill-defined near rest
    kappa_min_speed: float = 0.5
    #: largest angle between the direction of travel and the reference
    max_heading_offset: float = math.pi / 3.0

    def __post_init__(self):
        if min(self.J_max, self.a_max, self.v_max, self.kappa_max) <= 0:
            raise InputError("comfort limits must be positive")


@dataclass(frozen=True)
class ProfileCandidate:
    """One sampled 1-D profile with its axis cost."""

    tc: TerminalCondition
    poly: MotionPoly
    cost: float
    feasible: bool = True


# --- lateral ---------------------------------------------------------------

def gen_lateral(start: Sequence[float], grid: SamplingGrid, weights: CostWeights) -> List[ProfileCandidate]:
    """Quintics to every offset ``k * delta_d`` for every horizon."""
    out = []
    for d_j in grid.lateral_offsets():
        for T in grid.horizons():
            poly = solve_quintic(start, (d_j, 0.0, 0.0), T)
            cost = weights.k_j * jerk_integral(poly) + weights.k_t * T + weights.k_s * d_j * d_j
            out.append(ProfileCandidate(TerminalCondition("position", (d_j, 0.0, 0.0), T, "lateral"), poly, cost))
    return out


# --- longitudinal ----------------------------------------------------------

def _lon_cost(weights, poly, T, deviation):
    return weights.k_j * jerk_integral(poly) + weights.k_t * T + weights.k_s * deviation * deviation


def gen_stopping(start: Sequence[float], s_d: float, grid: SamplingGrid, weights: CostWeights) -> List[ProfileCandidate]:
    """Come to rest at ``s_d - k * delta_s`` for ``k = 0..n_s``."""
    s0 = start[0]
    if s_d < s0:
        raise InputError(f"stop target {s_d} lies behind the vehicle at {s0}")
    out = []
    for k in range(grid.n_s + 1):
        s_j = s_d - k * grid.delta_s
        if s_j < s0:
            continue
        for T in grid.horizons():
            poly = solve_quintic(start, (s_j, 0.0, 0.0), T)
            tc = TerminalCondition("position", (s_j, 0.0, 0.0), T, "stopping")
            out.append(ProfileCandidate(tc, poly, _lon_cost(weights, poly, T, s_d - s_j)))
    return out


Prediction1D = Union[Tuple[float, float, float], Callable[[float], Tuple[float, float, float]]]


def _at(pred: Prediction1D, T: float) -> Tuple[float, float, float]:
    return tuple(pred(T)) if callable(pred) else tuple(pred)


def following_target(pred_pv: Tuple[float, float, float], D0: float, tau: float, dv: float = 0.0):
    """Terminal ``(s, s_dot, s_ddot)`` behind a lead at predicted state ``pred_pv``."""
    sp, vp, ap = pred_pv
    return sp - (D0 + tau * vp), vp + dv - tau * ap, ap


def gen_following(start: Sequence[float], pred_pv: Prediction1D, D0: float, tau: float,
                  grid: SamplingGrid, weights: CostWeights) -> List[ProfileCandidate]:
    """Keep ``D0 + tau * v`` behind the lead vehicle.

    ``pred_pv`` is the lead's predicted ``(s, s_dot, s_ddot)`` at the end of
    the horizon, either fixed or as a function of the horizon.  Targets
    behind the ego or with negative speed are skipped.
    """
    s0 = start[0]
    out = []
    for T in grid.horizons():
        pv = _at(pred_pv, T)
        s_ref = following_target(pv, D0, tau)[0]
        for k in range(-grid.n_v, grid.n_v + 1):
            s_j, v_j, a_j = following_target(pv, D0, tau, k * grid.delta_v)
            if s_j < s0 or v_j < 0:
                continue
            poly = solve_quintic(start, (s_j, v_j, a_j), T)
            tc = TerminalCondition("position", (s_j, v_j, a_j), T, "following")
            out.append(ProfileCandidate(tc, poly, _lon_cost(weights, poly, T, s_ref - s_j)))
    return out


def merging_target(pred_pv, pred_fv, dv: float = 0.0):
    """Midpoint of the gap; speed and acceleration averaged over the two neighbours."""
    return (0.5 * (pred_pv[0] + pred_fv[0]), 0.5 * (pred_pv[1] + pred_fv[1]) + dv, 0.5 * (pred_pv[2] + pred_fv[2]))


def gen_merging(start: Sequence[float], pred_pv: Prediction1D, pred_fv: Prediction1D,
                grid: SamplingGrid, weights: CostWeights, D0: float = 5.0,
                vehicle_length: float = 4.5) -> List[ProfileCandidate]:
    """Aim for the middle of the gap between the preceding and following vehicle.

    When the predicted gap is shorter than ``vehicle_length + 2 * D0`` the
    candidates are still returned but flagged infeasible.
    """
    out = []
    for T in grid.horizons():
        pv, fv = _at(pred_pv, T), _at(pred_fv, T)
        feasible = (pv[0] - fv[0]) >= vehicle_length + 2.0 * D0
        s_ref = merging_target(pv, fv)[0]
        for k in range(-grid.n_v, grid.n_v + 1):
            s_j, v_j, a_j = merging_target(pv, fv, k * grid.delta_v)
            if v_j < 0:
                continue
            poly = solve_quintic(start, (s_j, v_j, a_j), T)
            tc = TerminalCondition("position", (s_j, v_j, a_j), T, "merging")
            out.append(ProfileCandidate(tc, poly, _lon_cost(weights, poly, T, s_ref - s_j), feasible))
    return out


def gen_velocity_keeping(start: Sequence[float], v_des: float, grid: SamplingGrid,
                         weights: CostWeights) -> List[ProfileCandidate]:
    """Quartics reaching ``v_des + k * delta_v`` with zero acceleration."""
    if v_des < 0:
        raise InputError("desired velocity must be non-negative")
    out = []
    for k in range(-grid.n_v, grid.n_v + 1):
        v_j = v_des + k * grid.delta_v
        if v_j < 0:
            continue
        for T in grid.horizons():
            poly = solve_quartic(start, (v_j, 0.0), T)
            tc = TerminalCondition("velocity", (v_j, 0.0), T, "velocity_keeping")
            out.append(ProfileCandidate(tc, poly, _lon_cost(weights, poly, T, v_des - v_j)))
    return out


# --- assembly and selection -----------------------------------------------

def _comfortable(cands: Sequence[ProfileCandidate], J_max: float) -> List[ProfileCandidate]:
    if not cands:
        return []
    ok = max_abs_jerk_many([c.poly for c in cands]) <= J_max
    return [c for c, k in zip(cands, ok) if k and c.feasible]


def _pairs(lat: Sequence[ProfileCandidate], lon: Sequence[ProfileCandidate], pairing: str):
    if pairing == "all":
        I, J = np.meshgrid(np.arange(len(lat)), np.arange(len(lon)), indexing="ij")
        return I.ravel(), J.ravel()
    if pairing != "matched":
        raise InputError(f"unknown pairing {pairing!r}")
    by_T = {}
    for j, c in enumerate(lon):
        by_T.setdefault(round(c.poly.T, 6), []).append(j)
    I, J = [], []
    for i, c in enumerate(lat):
        for j in by_T.get(round(c.poly.T, 6), ()):
            I.append(i)
            J.append(j)
    return np.array(I, dtype=int), np.array(J, dtype=int)


def assemble_candidates(lat_set: Sequence[ProfileCandidate], lon_set: Sequence[ProfileCandidate],
                        ref: ReferenceLine, limits: ComfortLimits, weights: CostWeights, dt: float,
                        pairing: str = "matched", mode: str = "") -> CandidateSet:
    """Realise lateral x longitudinal pairs and keep the feasible ones.

    ``pairing="matched"`` combines profiles with equal horizons only (the
    default, which keeps the set near 500 on the default grid);
    ``pairing="all"`` takes the full product and lets the shorter profile
    continue from its terminal state.

    A pair is dropped if either axis exceeds ``J_max``, the longitudinal
    speed goes negative, the conversion folds over, the Cartesian speed,
    acceleration or curvature exceed their limits, or the direction of
    travel turns more than ``max_heading_offset`` away from the reference.
    """
    lat = _comfortable(lat_set, limits.J_max)
    lon = _comfortable(lon_set, limits.J_max)
    if not lat or not lon:
        return CandidateSet.empty(mode)
    I, J = _pairs(lat, lon, pairing)
    if len(I) == 0:
        return CandidateSet.empty(mode)

    T_lat = np.array([c.poly.T for c in lat])
    T_lon = np.array([c.poly.T for c in lon])
    horizon = np.maximum(T_lat[I], T_lon[J])
    t = time_grid(horizon.max(), dt)
    K = len(t)
    n_points = np.rint(horizon / dt).astype(int) + 1
    valid = np.arange(K)[None, :] < n_points[:, None]

    dlat = sample_many([c.poly for c in lat], t)
    dlon = sample_many([c.poly for c in lon], t)
    d, dd, ddd = dlat[0][I], dlat[1][I], dlat[2][I]
    s, sd, sdd = dlon[0][J], dlon[1][J], dlon[2][J]

    # the reference only depends on s, so look it up per longitudinal profile
    on_ref = ref.interpolate(np.clip(dlon[0], 0.0, ref.total_length))
    on_ref = tuple(q[J] for q in on_ref)
    x, y, th, v, a, kappa, ok = frenet_arrays_to_cartesian(ref, s, sd, sdd, d, dd, ddd, on_ref)
    bad = ~ok | (sd < -1e-6) | (v > limits.v_max + 1e-9) | (np.abs(a) > limits.a_max + 1e-9)
    bad |= (np.abs(kappa) > limits.kappa_max) & (v > limits.kappa_min_speed)
    # no sideways or backwards creeping, even at walking pace
    bad |= np.abs(np.arctan2(dd, sd * (1.0 - on_ref[3] * d))) > limits.max_heading_offset
    bad &= valid
    idx = np.flatnonzero(~bad.any(axis=1))

    cost = weights.k_lat * np.array([c.cost for c in lat])[I] + weights.k_lon * np.array([c.cost for c in lon])[J]
    pts = np.empty((len(idx), K, 7))
    pts[:, :, 0] = t
    for col, arr in enumerate((x, y, th, v, a, kappa), start=1):
        pts[:, :, col] = arr[idx]
    lat_target = np.array([c.tc.target[0] for c in lat])[I]
    sources = [(lat[I[k]].poly, lon[J[k]].poly) for k in idx]
    return CandidateSet(pts, n_points[idx], cost[idx], horizon[idx], lat_target[idx], sources, mode)


def select_optimal(candidates) -> Trajectory:
    """Cheapest candidate; ties go to the longer horizon, then the smaller
    ``|d_j|``, then the earlier candidate."""
    n = len(candidates)
    if n == 0:
        raise NoFeasibleTrajectory()
    if isinstance(candidates, CandidateSet):
        cost, horizon, lat = candidates.cost, candidates.horizon, candidates.lateral_target
    else:
        cost = np.array([c.cost for c in candidates], dtype=float)
        horizon = np.array([c.horizon or c.t[-1] for c in candidates], dtype=float)
        lat = np.array([c.lateral_target for c in candidates], dtype=float)
    order = np.lexsort((np.arange(n), np.abs(lat), -horizon, cost))
    return candidates[int(order[0])]


# --- one planning tick -----------------------------------------------------

@dataclass
class ModeInputs:
    """Mode-specific inputs; only the fields of the active mode are read."""

    v_des: float = 0.0
    s_d: Optional[float] = None
    pred_pv: Optional[Prediction1D] = None
    pred_fv: Optional[Prediction1D] = None
    D0: float = 5.0
    tau: float = 1.0
    vehicle_length: float = 4.5


@dataclass
class PlanResult:
    trajectory: Trajectory
    mode: str
    n_candidates: int
    n_collision_free: int
    candidates: Optional[CandidateSet] = field(default=None, repr=False)


def longitudinal_candidates(ego: FrenetState, mode: str, inputs: ModeInputs, grid: SamplingGrid,
                            weights: CostWeights) -> List[ProfileCandidate]:
    start = ego.lon
    if mode == "stopping":
        if inputs.s_d is None:
            raise InputError("stopping mode needs s_d")
        return gen_stopping(start, inputs.s_d, grid, weights)
    if mode == "following":
        if inputs.pred_pv is None:
            raise InputError("following mode needs a lead prediction")
        return gen_following(start, inputs.pred_pv, inputs.D0, inputs.tau, grid, weights)
    if mode == "merging":
        if inputs.pred_pv is None or inputs.pred_fv is None:
            raise InputError("merging mode needs both neighbour predictions")
        return gen_merging(start, inputs.pred_pv, inputs.pred_fv, grid, weights, inputs.D0, inputs.vehicle_length)
    if mode == "velocity_keeping":
        return gen_velocity_keeping(start, inputs.v_des, grid, weights)
    raise InputError(f"unknown driving mode {mode!r}")


def plan_tick(ego: FrenetState, mode: str, inputs: ModeInputs, ref: ReferenceLine, predictions: Sequence,
              grid: SamplingGrid, limits: ComfortLimits, weights: CostWeights,
              ego_dims: Tuple[float, float] = (2.0, 4.5), dt: float = 0.1, pairing: str = "matched",
              pedestrian_radius: float = 0.4) -> PlanResult:
    """Generate, filter and select one trajectory.

    Raises:
        NoFeasibleTrajectory: nothing survived; counts are attached.
    """
    lat = gen_lateral(ego.lat, grid, weights)
    lon = longitudinal_candidates(ego, mode, inputs, grid, weights)
    phi = assemble_candidates(lat, lon, ref, limits, weights, dt, pairing, mode)
    phi_star = filter_collision_free(phi, predictions, ego_dims, pedestrian_radius)
    if len(phi_star) == 0:
        raise NoFeasibleTrajectory(f"no feasible trajectory in {mode} mode", len(phi), 0)
    best = select_optimal(phi_star)
    return PlanResult(best, mode, len(phi), len(phi_star), phi_star)
