"""Closed-loop scenario execution.

Each replan tick runs perception, localization, prediction, mode
selection and planning; between ticks the ego follows the last plan
exactly.  Runs end at the goal, on a collision, when the ego is blocked,
or at the time limit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..collision import trajectory_collision_free
from ..config import Config
from ..errors import ConversionError, FrenetRangeError, InputError, NoFeasibleTrajectory
from ..frenet import FrenetState, ReferenceLine, Trajectory, build_reference, extended_waypoints
from ..localization import (EgoEstimate, LocalizationFilter, NavSignals, estimate_to_frenet,
                            local_to_geodetic)
from ..planner import ModeInputs, plan_tick
from ..prediction import ObstacleState, PredictedTrajectory, build_dense_graph, predict_all, travel_distance
from .infractions import InfractionDetector, InfractionEvent
from .metrics import MetricsReport, compute_metrics
from .world import Scenario, TrafficControlObservation, WorldState, initial_world, perceive, step

LOG_COLUMNS = ("t", "x", "y", "theta", "v", "a", "s", "d", "selected_cost", "n_candidates",
               "n_collision_free", "mode")
EMERGENCY = "emergency_stop"
HOLD = "hold_previous"

#: reference extension behind the start and past the goal
REF_BACK = 20.0
REF_AHEAD = 100.0
#: distance kept between the front bumper and a pedestrian's crossing point
PEDESTRIAN_BUFFER = 2.0
SPAWN_COVARIANCE = 1e-4


class RouteContext:
    """The ego's reference line and route bookkeeping on it."""

    def __init__(self, world_map, ds: float = 0.5):
        wps = world_map.route_waypoints()
        self.ref: ReferenceLine = build_reference(extended_waypoints(wps, REF_BACK, REF_AHEAD), ds)
        sx, sy, _ = world_map.route.start
        gx, gy = world_map.route.goal
        self.s_start = self.ref.project(sx, sy)[0]
        self.s_goal = self.ref.project(gx, gy)[0]
        self.goal = (gx, gy)
        self.length = self.s_goal - self.s_start
        if self.length <= 0:
            raise InputError("route goal must lie ahead of its start")
        self.lane_width = min(world_map.road(r).lane_width for r in world_map.route.roads)
        self.control_s: Dict[str, float] = {}
        for ctl in world_map.traffic_controls:
            if ctl.road_id in world_map.route.roads:
                px, py = world_map.road(ctl.road_id).point_at(ctl.s)
                self.control_s[ctl.id] = self.ref.project(px, py)[0]


@dataclass
class PlanRecord:
    t: float
    trajectory: Optional[Trajectory]
    mode: str
    predictions: List[PredictedTrajectory]
    start: Optional[FrenetState]


@dataclass
class RunResult:
    metrics: MetricsReport
    log: List[dict]
    events: List[InfractionEvent]
    ego_history: np.ndarray  # rows of t, x, y, theta, v, a
    plans: List[PlanRecord] = field(default_factory=list)
    route: Optional[RouteContext] = None

    def log_csv(self) -> str:
        return format_log(self.log)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6f}"


def format_log(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in LOG_COLUMNS])
    return buf.getvalue()


# --- mode selection ------------------------------------------------------------

@dataclass
class _Track:
    """An obstacle expressed along the reference."""

    ob: ObstacleState
    s: float
    d: float
    v: float  # speed along the reference
    a: float


def _track(ob: ObstacleState, ref: ReferenceLine) -> _Track:
    s, d = ref.project(ob.x, ob.y)
    thr = float(ref.interpolate(s)[2])
    c = math.cos(ob.yaw - thr)
    return _Track(ob, s, d, max(0.0, ob.v * c), ob.a * c)


def _constant_accel(s0: float, v: float, a: float):
    """Predicted ``(s, v, a)`` at horizon ``T`` under constant acceleration, never reversing."""
    def at(T: float):
        s = s0 + travel_distance(v, a, T)
        vT = v + a * T
        if vT <= 0.0:
            return s, 0.0, 0.0
        return s, vT, a
    return at


@dataclass
class LadderState:
    """What the mode ladder remembers between ticks."""

    satisfied_stops: set = field(default_factory=set)
    stopping_for: set = field(default_factory=set)


def choose_modes(start: FrenetState, tracks: Sequence[_Track], traffic: Sequence[TrafficControlObservation],
                 predictions: Sequence[PredictedTrajectory], ctx: RouteContext, cfg: Config,
                 ego_dims, v_des: float, ladder: LadderState, merge_zones=()) -> List[Tuple[str, ModeInputs]]:
    """Driving modes to try this tick, most appropriate first.

    Every active constraint proposes a mode with a target position at the
    longest horizon: a stop line or pedestrian conflict proposes stopping,
    a lead vehicle in the lane proposes following, a merge zone with
    vehicles on both sides proposes merging.  The most restrictive
    proposal wins.  Velocity keeping is added only when nothing
    constrains the ego beyond a merge.
    """
    grid, lim, pl = cfg.grid, cfg.limits, cfg.planner
    w_e, l_e = ego_dims
    s0, v0 = start.s, max(start.s_dot, 0.0)
    front = s0 + 0.5 * l_e
    T = grid.T_max
    engage = v0 * T / 2.0 + 5.0
    base = dict(D0=pl.D0, tau=pl.tau, vehicle_length=l_e)
    proposals: List[Tuple[float, str, ModeInputs]] = []
    catch_up = False

    def stop_at(s_d: float, key: str):
        s_d = max(s_d, s0)
        if s_d - s0 <= engage or key in ladder.stopping_for:
            ladder.stopping_for.add(key)
            proposals.append((s_d, "stopping", ModeInputs(v_des=v_des, s_d=s_d, **base)))

    active = set()
    # traffic controls
    for obs in traffic:
        gap = obs.stop_line_s - front
        s_d = obs.stop_line_s - 0.5 * l_e - pl.stop_margin
        if obs.S_sign == "stop_sign":
            if obs.id in ladder.satisfied_stops:
                continue
            if v0 < cfg.sim.stop_sign_speed and 0.0 <= gap <= cfg.sim.stop_sign_window:
                ladder.satisfied_stops.add(obs.id)
                continue
            active.add(obs.id)
            stop_at(s_d, obs.id)
        elif obs.S_sign in ("red", "yellow"):
            decel = lim.a_max if obs.S_sign == "red" else 0.5 * lim.a_max
            can_stop = gap - pl.stop_margin >= v0 * v0 / (2.0 * decel) - 1e-6
            if can_stop or obs.id in ladder.stopping_for:
                if gap > -1e-6:
                    active.add(obs.id)
                    stop_at(s_d, obs.id)

    # pedestrians heading into the lane ahead
    half_lane = 0.5 * ctx.lane_width
    for p in predictions:
        if p.kind != "pedestrian":
            continue
        r = max(cfg.collision.pedestrian_radius, 0.5 * math.hypot(*p.dims))
        for row in p.points:
            ps, pd = ctx.ref.project(row[1], row[2])
            if abs(pd) < half_lane + r + 0.5 * w_e and ps > front - 0.5:
                key = f"ped:{p.source_obstacle}"
                active.add(key)
                stop_at(ps - r - 0.5 * l_e - PEDESTRIAN_BUFFER, key)
                break

    ladder.stopping_for &= active

    # lead vehicle or obstacle in the lane
    ahead = [tr for tr in tracks if tr.ob.kind != "pedestrian" and tr.s > s0
             and abs(tr.d) < half_lane + 0.5 * tr.ob.dims[0]]
    if ahead:
        lead = min(ahead, key=lambda tr: tr.s)
        s_bumper = lead.s - 0.5 * lead.ob.dims[1] - 0.5 * l_e
        pv = _constant_accel(s_bumper, lead.v, lead.a)
        sT, vT, aT = pv(T)
        s_target = sT - (pl.D0 + pl.tau * vT)
        if s_target <= s0 + v_des * T:
            proposals.append((s_target, "following", ModeInputs(v_des=v_des, pred_pv=pv, **base)))
            # a lead that is pulling away may be out of reach; speeding up is then fine
            catch_up = s_target > s0 + v0 * T

    # merging between two neighbours
    s_rel = s0 - ctx.s_start
    if any(a <= s_rel <= b for a, b in merge_zones):
        near = [tr for tr in tracks if tr.ob.kind == "vehicle" and abs(tr.d) < half_lane + 0.5 * tr.ob.dims[0]]
        before = [tr for tr in near if tr.s > s0]
        behind = [tr for tr in near if tr.s <= s0]
        if before and behind:
            pvt = min(before, key=lambda tr: tr.s)
            fvt = max(behind, key=lambda tr: tr.s)
            pv = _constant_accel(pvt.s, pvt.v, pvt.a)
            fv = _constant_accel(fvt.s, fvt.v, fvt.a)
            mid = 0.5 * (pv(T)[0] + fv(T)[0])
            proposals.append((mid, "merging", ModeInputs(v_des=v_des, pred_pv=pv, pred_fv=fv, **base)))

    proposals.sort(key=lambda p: p[0])
    modes = [(m, inp) for _, m, inp in proposals]
    # velocity keeping would ignore a stop line or a close lead, so it is no fallback for them
    if all(m == "merging" or (m == "following" and catch_up) for m, _ in modes):
        modes.append(("velocity_keeping", ModeInputs(v_des=v_des, **base)))
    return modes


def soft_stop_inputs(start: FrenetState, cfg: Config, v_des: float, ego_dims) -> ModeInputs:
    """Stopping target a comfortable braking distance ahead."""
    v0 = max(start.s_dot, 0.0)
    dist = v0 * v0 / cfg.limits.a_max
    return ModeInputs(v_des=v_des, s_d=start.s + dist, D0=cfg.planner.D0, tau=cfg.planner.tau,
                      vehicle_length=ego_dims[1])


def _can_hold(plan: Trajectory, elapsed: float, interval: float, predictions, ego_dims, ped_r) -> bool:
    """Whether the rest of ``plan`` may be executed for another interval.

    The plan must either last past the next replan or end at rest, and its
    remainder must still clear the current predictions.
    """
    pts = plan.points
    if pts[-1, 0] < elapsed + interval - 1e-9 and abs(pts[-1, 4]) > 1e-3:
        return False
    rest = pts[pts[:, 0] >= elapsed - 1e-9].copy()
    if len(rest) == 0:
        rest = pts[-1:].copy()
    rest[:, 0] -= rest[0, 0]
    if len(rest) < 2:
        rest = np.vstack([rest, rest])
        rest[1, 0] = plan.dt or interval
    rem = Trajectory(points=rest, frenet_source=plan.frenet_source)
    return trajectory_collision_free(rem, predictions, ego_dims, ped_r)


# --- the loop ------------------------------------------------------------------

def _nav_signals(world: WorldState, origin, rng, loc_cfg) -> NavSignals:
    e = world.ego
    gs, cs, isg = loc_cfg.get("gnss_sigma", 0.0), loc_cfg.get("compass_sigma", 0.0), loc_cfg.get("imu_sigma", 0.0)
    x = e.x + (rng.normal(0.0, gs) if gs > 0 else 0.0)
    y = e.y + (rng.normal(0.0, gs) if gs > 0 else 0.0)
    yaw = e.theta + (rng.normal(0.0, cs) if cs > 0 else 0.0)
    wz = e.v * e.kappa + (rng.normal(0.0, isg) if isg > 0 else 0.0)
    ax = e.a + (rng.normal(0.0, isg) if isg > 0 else 0.0)
    lat, lon = local_to_geodetic(x, y, origin)
    return NavSignals(lat, lon, 0.0, 0.0, 0.0, wz, ax, 0.0, 9.81, yaw)


def run_scenario(scenario: Scenario, cfg: Config = Config(), seed: int = 0, keep_plans: bool = False) -> RunResult:
    """Run one scenario to termination and score it."""
    perc = replace(cfg.perception, **{k: float(v) for k, v in scenario.perception.items()})
    loc = replace(cfg.localization, **{k: (tuple(v) if isinstance(v, list) else float(v))
                                       for k, v in scenario.localization.items()})
    ego_dims = scenario.ego.dims
    lim = cfg.limits
    v_des = lim.v_max if scenario.ego.speed_limit is None else min(scenario.ego.speed_limit, lim.v_max)

    ctx = RouteContext(scenario.world_map, cfg.planner.reference_ds)
    graph = build_dense_graph(scenario.world_map, cfg.prediction.graph_ds)
    origin = scenario.world_map.origin
    perception_rng, nav_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    nav_cfg = {"gnss_sigma": loc.gnss_sigma, "compass_sigma": loc.compass_sigma, "imu_sigma": loc.imu_sigma}

    sim_dt = cfg.sim.dt
    every = max(1, int(round(cfg.planner.replan_interval / sim_dt)))
    pred_h = max(cfg.prediction.horizon, cfg.grid.T_max)
    detector = InfractionDetector(cfg.infractions)
    ladder = LadderState()

    world = initial_world(scenario)
    filt: Optional[LocalizationFilter] = None
    plan: Optional[Trajectory] = None
    t_plan = 0.0
    log: List[dict] = []
    plans: List[PlanRecord] = []
    history = [(world.t, world.ego.x, world.ego.y, world.ego.theta, world.ego.v, world.ego.a)]
    s_cur, d_cur = ctx.ref.project(world.ego.x, world.ego.y)
    best_s = s_cur
    driven = 0.0
    termination = "timeout"
    n_steps = int(math.floor(scenario.time_limit / sim_dt + 1e-9))

    for k in range(n_steps):
        if k % every == 0:
            # localization
            sig = _nav_signals(world, origin, nav_rng, nav_cfg)
            if filt is None:
                e = world.ego
                # the spawn pose is known, so the filter starts there with a tight prior
                prior = EgoEstimate(e.x, e.y, e.theta, e.v, e.a, SPAWN_COVARIANCE * np.eye(5))
                filt = LocalizationFilter(prior, origin, loc.q, loc.gnss_sigma, loc.compass_sigma,
                                          loc.imu_sigma)
                est = prior
            else:
                est = filt.step(sig, every * sim_dt)

            obstacles, traffic = perceive(world, ctx.ref, perception_rng, perc.range, perc.traffic_range,
                                          perc.position_sigma, perc.velocity_sigma, perc.dropout,
                                          ego_s=s_cur, control_s=ctx.control_s)
            predictions = predict_all(obstacles, graph, pred_h, cfg.planner.dt,
                                      max_snap=cfg.prediction.max_snap)

            start = None
            if plan is not None:
                px, py = plan.state_at(world.t - t_plan)[:2]
                if math.hypot(px - est.x, py - est.y) <= loc.stitch_tolerance:
                    start = plan.frenet_at(world.t - t_plan)
            if start is None:
                try:
                    start = estimate_to_frenet(est, ctx.ref)
                except (FrenetRangeError, ConversionError):
                    start = None

            def attempt(options):
                for m, inputs in options:
                    try:
                        return m, plan_tick(start, m, inputs, ctx.ref, predictions, cfg.grid, lim, cfg.weights,
                                            ego_dims, cfg.planner.dt, cfg.planner.pairing,
                                            cfg.collision.pedestrian_radius)
                    except (NoFeasibleTrajectory, InputError):
                        continue
                return EMERGENCY, None

            # ladder modes, then the previous plan, then a soft stop, then an emergency stop
            mode, result = EMERGENCY, None
            if start is not None:
                tracks = [_track(ob, ctx.ref) for ob in obstacles]
                mode, result = attempt(choose_modes(start, tracks, traffic, predictions, ctx, cfg, ego_dims,
                                                    v_des, ladder, scenario.merge_zones))
            if result is None and plan is not None and _can_hold(
                    plan, world.t - t_plan, every * sim_dt, predictions, ego_dims, cfg.collision.pedestrian_radius):
                mode = HOLD  # t_plan stays at the held plan's start
            elif result is None and start is not None:
                mode, result = attempt([("stopping", soft_stop_inputs(start, cfg, v_des, ego_dims))])
            n_cand = result.n_candidates if result else 0
            n_free = result.n_collision_free if result else 0
            if result is not None:
                plan, t_plan = result.trajectory, world.t
            elif mode != HOLD:
                plan, t_plan = None, world.t
            e = world.ego
            if plan is None:
                mode = EMERGENCY
            log.append({
                "t": world.t, "x": e.x, "y": e.y, "theta": e.theta, "v": e.v, "a": e.a,
                "s": start.s if start else s_cur, "d": start.d if start else d_cur,
                "selected_cost": plan.cost if plan is not None else float("nan"),
                "n_candidates": n_cand, "n_collision_free": n_free, "mode": mode,
            })
            if keep_plans:
                plans.append(PlanRecord(world.t, plan, mode, predictions, start))

        prev = world.ego
        world = step(world, plan, sim_dt, lim.a_max, t_plan)
        e = world.ego
        driven += math.hypot(e.x - prev.x, e.y - prev.y)
        history.append((world.t, e.x, e.y, e.theta, e.v, e.a))
        s_cur, d_cur = ctx.ref.project(e.x, e.y)
        best_s = max(best_s, s_cur)

        lines = [(cid, s_line, world.light_state(cid)) for cid, s_line in ctx.control_s.items()]
        new = detector.update(world.t, (e.x, e.y, e.theta), e.v, ego_dims, world.obstacles(),
                              s_cur + 0.5 * ego_dims[1], lines, d_cur)
        kinds = {ev.type for ev in new}
        if kinds & {"collision_pedestrian", "collision_vehicle", "collision_layout"}:
            termination = "collision_stop"
            break
        if "blocked" in kinds:
            termination = "blocked"
            break
        if math.hypot(e.x - ctx.goal[0], e.y - ctx.goal[1]) <= cfg.sim.goal_tolerance or s_cur >= ctx.s_goal:
            termination = "goal"
            break

    completed = ctx.length if termination == "goal" else min(max(best_s - ctx.s_start, 0.0), ctx.length)
    metrics = compute_metrics(ctx.length, detector.events, completed, cfg.infractions, termination, driven)
    return RunResult(metrics, log, list(detector.events), np.array(history), plans, ctx)


def write_outputs(result: RunResult, out_dir) -> Tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mpath, cpath = out / "metrics.json", out / "trajectory.csv"
    mpath.write_text(result.metrics.to_json())
    cpath.write_text(result.log_csv())
    return mpath, cpath
