"""Reference lines and Frenet <-> Cartesian conversion.

A :class:`ReferenceLine` is a cubic spline through centerline waypoints,
resampled at uniform arc length.  Between samples the curve is a cubic
Hermite segment built from the sampled positions and headings, and the
forward and inverse conversions both use that same segment, so a round
trip is exact up to the Newton tolerance of the projection.

Lateral offset ``d`` is positive to the left of the direction of travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple
from collections.abc import Sequence as _SequenceABC

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConversionError, DegenerateInputError, FrenetRangeError, InputError
from .polynomial import MotionPoly, sample

#: Maximum |d| accepted by :func:`cartesian_to_frenet`.
CORRIDOR = 50.0

# columns of Trajectory.points
T_COL, X_COL, Y_COL, THETA_COL, V_COL, A_COL, KAPPA_COL = range(7)


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class FrenetState:
    s: float
    s_dot: float = 0.0
    s_ddot: float = 0.0
    d: float = 0.0
    d_dot: float = 0.0
    d_ddot: float = 0.0

    @property
    def lon(self) -> Tuple[float, float, float]:
        return (self.s, self.s_dot, self.s_ddot)

    @property
    def lat(self) -> Tuple[float, float, float]:
        return (self.d, self.d_dot, self.d_ddot)


@dataclass(eq=False)
class ReferenceLine:
    """Arc-length sampled reference curve.

    Attributes:
        s, x, y, heading, curvature: sample arrays at uniform spacing ``ds``.
    """

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    curvature: np.ndarray
    ds: float
    dcurvature: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.dcurvature is None:
            self.dcurvature = np.gradient(self.curvature, self.ds) if len(self.s) > 2 else np.zeros_like(self.s)
        # unwrapped copy is what gets interpolated
        self._heading_u = np.unwrap(self.heading)
        self._seg_dx = np.diff(self.x)
        self._seg_dy = np.diff(self.y)
        self._seg_len2 = self._seg_dx ** 2 + self._seg_dy ** 2

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    def __len__(self):
        return len(self.s)

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        n = len(self.s) - 1
        i = np.clip(np.floor(s / self.ds).astype(int), 0, n - 1)
        u = (s - self.s[i]) / self.ds
        return i, u

    def interpolate(self, s):
        """Pose and curvature of the reference at arc length ``s``.

        Returns ``(x, y, heading, kappa, dkappa)``; works elementwise on arrays.
        """
        i, u = self._locate(s)
        h = self.ds
        th0 = self._heading_u[i]
        th1 = self._heading_u[i + 1]
        u2 = u * u
        u3 = u2 * u
        h00 = 2 * u3 - 3 * u2 + 1
        h10 = u3 - 2 * u2 + u
        h01 = -2 * u3 + 3 * u2
        h11 = u3 - u2
        c0, s0, c1, s1 = np.cos(th0), np.sin(th0), np.cos(th1), np.sin(th1)
        x = h00 * self.x[i] + h10 * h * c0 + h01 * self.x[i + 1] + h11 * h * c1
        y = h00 * self.y[i] + h10 * h * s0 + h01 * self.y[i + 1] + h11 * h * s1
        # derivatives w.r.t. u
        g00 = 6 * u2 - 6 * u
        g10 = 3 * u2 - 4 * u + 1
        g01 = -6 * u2 + 6 * u
        g11 = 3 * u2 - 2 * u
        dx = g00 * self.x[i] + g10 * h * c0 + g01 * self.x[i + 1] + g11 * h * c1
        dy = g00 * self.y[i] + g10 * h * s0 + g01 * self.y[i + 1] + g11 * h * s1
        heading = np.arctan2(dy, dx)
        kappa = self.curvature[i] + u * (self.curvature[i + 1] - self.curvature[i])
        dkappa = self.dcurvature[i] + u * (self.dcurvature[i + 1] - self.dcurvature[i])
        return x, y, heading, kappa, dkappa

    def _curve_derivs(self, s):
        """Position, first and second derivative w.r.t. ``s`` (scalar)."""
        i, u = self._locate(s)
        i = int(i)
        h = self.ds
        th0, th1 = self._heading_u[i], self._heading_u[i + 1]
        P0 = np.array([self.x[i], self.y[i]])
        P1 = np.array([self.x[i + 1], self.y[i + 1]])
        M0 = h * np.array([math.cos(th0), math.sin(th0)])
        M1 = h * np.array([math.cos(th1), math.sin(th1)])
        u = float(u)
        u2, u3 = u * u, u * u * u
        p = (2 * u3 - 3 * u2 + 1) * P0 + (u3 - 2 * u2 + u) * M0 + (-2 * u3 + 3 * u2) * P1 + (u3 - u2) * M1
        dp = ((6 * u2 - 6 * u) * P0 + (3 * u2 - 4 * u + 1) * M0 + (-6 * u2 + 6 * u) * P1 + (3 * u2 - 2 * u) * M1) / h
        ddp = ((12 * u - 6) * P0 + (6 * u - 4) * M0 + (-12 * u + 6) * P1 + (6 * u - 2) * M1) / (h * h)
        return p, dp, ddp

    def project(self, x: float, y: float) -> Tuple[float, float]:
        """Nearest-point projection: ``(s, d)`` with signed lateral offset.

        The closest sample segment seeds a Newton refinement on the
        interpolated curve.  Segments within 1e-6 m of the best distance are
        treated as ties and the smallest ``s`` wins.
        """
        px = x - self.x[:-1]
        py = y - self.y[:-1]
        u = np.clip((px * self._seg_dx + py * self._seg_dy) / self._seg_len2, 0.0, 1.0)
        ex = px - u * self._seg_dx
        ey = py - u * self._seg_dy
        dist = np.sqrt(ex * ex + ey * ey)
        best = dist.min()
        k = int(np.flatnonzero(dist <= best + 1e-6)[0])
        s = float(self.s[k] + u[k] * self.ds)
        L = self.total_length
        P = np.array([x, y])
        for _ in range(20):
            p, dp, ddp = self._curve_derivs(s)
            r = P - p
            f = r @ dp
            fp = -(dp @ dp) + r @ ddp
            if fp >= -1e-12:
                fp = -(dp @ dp)
            step = -f / fp
            s_new = min(max(s + step, 0.0), L)
            if abs(s_new - s) < 1e-12:
                s = s_new
                break
            s = s_new
        p, dp, _ = self._curve_derivs(s)
        r = P - p
        tx, ty = dp / np.hypot(dp[0], dp[1])
        d = float(-r[0] * ty + r[1] * tx)
        return float(s), d


def build_reference(waypoints: Sequence[Sequence[float]], ds: float = 0.5) -> ReferenceLine:
    """Cubic-spline reference line resampled at uniform arc length.

    The actual spacing is ``L / ceil(L / ds)`` so that both endpoints are
    samples; it never exceeds ``ds``.
    """
    if not (ds > 0 and math.isfinite(ds)):
        raise InputError(f"ds must be positive, got {ds}")
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DegenerateInputError("need at least two (x, y) waypoints")
    if not np.all(np.isfinite(pts)):
        raise InputError("waypoints must be finite")
    chord = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(chord < 1e-9):
        raise DegenerateInputError("duplicate consecutive waypoints")
    u = np.concatenate([[0.0], np.cumsum(chord)])
    bc = "natural" if len(pts) > 2 else "not-a-knot"
    if len(pts) == 2:
        # a line; CubicSpline needs no special care but keep it exactly linear
        pts = np.vstack([pts[0], 0.5 * (pts[0] + pts[1]), pts[1]])
        u = np.array([0.0, 0.5 * u[-1], u[-1]])
        bc = "natural"
    sx = CubicSpline(u, pts[:, 0], bc_type=bc)
    sy = CubicSpline(u, pts[:, 1], bc_type=bc)

    # dense arc-length table
    per_seg = 64
    uu = np.concatenate([np.linspace(u[i], u[i + 1], per_seg, endpoint=False) for i in range(len(u) - 1)] + [[u[-1]]])
    speed = np.hypot(sx(uu, 1), sy(uu, 1))
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(uu))])
    # Simpson-corrected length is not needed: table is only used for inversion
    L = float(arc[-1])
    n = max(1, int(math.ceil(L / ds - 1e-9)))
    step = L / n
    s = np.arange(n + 1) * step
    s[-1] = L
    us = np.interp(s, arc, uu)
    x = sx(us)
    y = sy(us)
    x[0], y[0] = pts[0]
    x[-1], y[-1] = pts[-1]
    dx, dy = sx(us, 1), sy(us, 1)
    ddx, ddy = sx(us, 2), sy(us, 2)
    heading = np.arctan2(dy, dx)
    curvature = (dx * ddy - dy * ddx) / np.power(dx * dx + dy * dy, 1.5)
    return ReferenceLine(s=s, x=x, y=y, heading=heading, curvature=curvature, ds=step)


def extended_waypoints(waypoints, back: float = 0.0, ahead: float = 0.0, spacing: float = 5.0):
    """Pad a waypoint list with straight runs before the start and past the end."""
    pts = [tuple(map(float, p)) for p in waypoints]
    out = list(pts)
    if ahead > 0:
        (x0, y0), (x1, y1) = pts[-2], pts[-1]
        L = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / L, (y1 - y0) / L
        k = max(1, int(math.ceil(ahead / spacing)))
        out += [(x1 + ux * ahead * j / k, y1 + uy * ahead * j / k) for j in range(1, k + 1)]
    if back > 0:
        (x0, y0), (x1, y1) = pts[0], pts[1]
        L = math.hypot(x1 - x0, y1 - y0)
        ux, uy = (x1 - x0) / L, (y1 - y0) / L
        k = max(1, int(math.ceil(back / spacing)))
        out = [(x0 - ux * back * j / k, y0 - uy * back * j / k) for j in range(k, 0, -1)] + out
    return out


def frenet_arrays_to_cartesian(ref: ReferenceLine, s, s_dot, s_ddot, d, d_dot, d_ddot, ref_at_s=None):
    """Vectorised Frenet -> Cartesian kinematics.

    Uses the velocity and acceleration vectors of ``p = r(s) + d n(s)``
    directly, so nothing divides by ``s_dot``.  Heading and curvature are
    reported relative to the reference where the speed vanishes.

    Returns ``(x, y, theta, v, a, kappa, ok)``; ``ok`` is False where the
    offset folds over the reference's centre of curvature or ``s`` falls
    outside the line.  ``ref_at_s`` may carry a precomputed
    ``ref.interpolate(s)`` result.
    """
    s = np.asarray(s, dtype=float)
    L = ref.total_length
    inside = (s >= -1e-9) & (s <= L + 1e-9)
    if ref_at_s is None:
        ref_at_s = ref.interpolate(np.clip(s, 0.0, L))
    xr, yr, thr, kr, dkr = ref_at_s
    cos_r, sin_r = np.cos(thr), np.sin(thr)
    one_minus = 1.0 - kr * d
    ok = inside & (one_minus > 0.0)

    x = xr - d * sin_r
    y = yr + d * cos_r
    # velocity/acceleration in the (tangent, normal) frame of the reference
    vt = s_dot * one_minus
    vn = d_dot
    at = s_ddot * one_minus - s_dot * (dkr * s_dot * d + kr * d_dot) - kr * s_dot * d_dot
    an = kr * s_dot * s_dot * one_minus + d_ddot
    v = np.hypot(vt, vn)
    moving = v > 1e-6
    vs = np.where(moving, v, 1.0)
    theta = thr + np.where(moving, np.arctan2(vn, vt), 0.0)
    a = np.where(moving, (vt * at + vn * an) / vs, at)
    kappa = np.where(moving, (vt * an - vn * at) / (vs * vs * vs), kr)
    return x, y, wrap_angle(theta), v, a, kappa, ok


def frenet_to_cartesian(ref: ReferenceLine, state: FrenetState):
    """Cartesian ``(x, y, theta, v, a, kappa)`` of a single Frenet state."""
    if not (-1e-9 <= state.s <= ref.total_length + 1e-9):
        raise ConversionError(f"s={state.s} outside reference [0, {ref.total_length}]")
    x, y, th, v, a, k, ok = frenet_arrays_to_cartesian(
        ref, np.array([state.s]), state.s_dot, state.s_ddot, state.d, state.d_dot, state.d_ddot
    )
    if not ok[0]:
        raise ConversionError("lateral offset folds over the reference centre of curvature")
    return float(x[0]), float(y[0]), float(th[0]), float(v[0]), float(a[0]), float(k[0])


def cartesian_to_frenet(ref: ReferenceLine, pose: Sequence[float], kappa: Optional[float] = None) -> FrenetState:
    """Project ``pose = (x, y, theta, v, a)`` onto the reference.

    ``a`` is the tangential acceleration.  Without an explicit path
    curvature the pose is assumed to travel parallel to the reference.
    """
    x, y, theta, v, a = (float(p) for p in pose)
    s, d = ref.project(x, y)
    if abs(d) > CORRIDOR:
        raise FrenetRangeError(f"pose is {abs(d):.1f} m from the reference (limit {CORRIDOR} m)")
    _, _, thr, kr, dkr = (float(q) for q in ref.interpolate(s))
    one_minus = 1.0 - kr * d
    if one_minus <= 0.0:
        raise ConversionError("pose lies beyond the reference centre of curvature")
    if kappa is None:
        kappa = kr / one_minus
    dth = theta - thr
    vt, vn = v * math.cos(dth), v * math.sin(dth)
    s_dot = vt / one_minus
    d_dot = vn
    # acceleration vector: tangential a plus centripetal v^2 kappa
    ac = v * v * kappa
    at = a * math.cos(dth) - ac * math.sin(dth)
    an = a * math.sin(dth) + ac * math.cos(dth)
    s_ddot = (at + s_dot * (dkr * s_dot * d + kr * d_dot) + kr * s_dot * d_dot) / one_minus
    d_ddot = an - kr * s_dot * s_dot * one_minus
    return FrenetState(s=s, s_dot=s_dot, s_ddot=s_ddot, d=d, d_dot=d_dot, d_ddot=d_ddot)


@dataclass(eq=False)
class Trajectory:
    """Time-sampled Cartesian trajectory.

    ``points`` has one row per sample with columns
    ``t, x, y, theta, v, a, kappa``.
    """

    points: np.ndarray
    frenet_source: Tuple[MotionPoly, MotionPoly]
    cost: float = 0.0
    feasible: bool = True
    mode: str = ""
    lateral_target: float = 0.0
    horizon: float = 0.0

    @property
    def t(self):
        return self.points[:, T_COL]

    @property
    def x(self):
        return self.points[:, X_COL]

    @property
    def y(self):
        return self.points[:, Y_COL]

    @property
    def theta(self):
        return self.points[:, THETA_COL]

    @property
    def v(self):
        return self.points[:, V_COL]

    @property
    def a(self):
        return self.points[:, A_COL]

    @property
    def kappa(self):
        return self.points[:, KAPPA_COL]

    @property
    def dt(self) -> float:
        return float(self.points[1, T_COL] - self.points[0, T_COL]) if len(self.points) > 1 else 0.0

    def frenet_at(self, t: float) -> FrenetState:
        """Frenet state of the generating polynomials at time ``t``."""
        lat, lon = self.frenet_source
        d = sample(lat, np.array([t]))[:3, 0]
        s = sample(lon, np.array([t]))[:3, 0]
        return FrenetState(s=float(s[0]), s_dot=float(s[1]), s_ddot=float(s[2]),
                           d=float(d[0]), d_dot=float(d[1]), d_ddot=float(d[2]))

    def state_at(self, t: float):
        """Linearly interpolated ``(x, y, theta, v, a, kappa)`` at time ``t``.

        Past the last sample the final row is returned.
        """
        tt = self.t
        if t <= tt[0]:
            row = self.points[0]
        elif t >= tt[-1]:
            row = self.points[-1]
        else:
            k = int(np.searchsorted(tt, t, side="right")) - 1
            w = (t - tt[k]) / (tt[k + 1] - tt[k])
            r0, r1 = self.points[k], self.points[k + 1]
            row = r0 + w * (r1 - r0)
            row = row.copy()
            row[THETA_COL] = r0[THETA_COL] + w * wrap_angle(r1[THETA_COL] - r0[THETA_COL])
        return tuple(float(v) for v in row[1:])


def time_grid(horizon: float, dt: float) -> np.ndarray:
    n = int(round(horizon / dt))
    return np.arange(n + 1) * dt


def realize_trajectory(ref: ReferenceLine, lat: MotionPoly, lon: MotionPoly, dt: float) -> Trajectory:
    """Sample a lateral/longitudinal polynomial pair into a Cartesian trajectory.

    The common horizon is the longer of the two; the shorter profile
    continues from its terminal state.  Conversion failures and reverse
    motion mark the result infeasible instead of raising.
    """
    horizon = max(lat.T, lon.T)
    t = time_grid(horizon, dt)
    d, dd, ddd, _ = sample(lat, t)
    s, sd, sdd, _ = sample(lon, t)
    x, y, th, v, a, k, ok = frenet_arrays_to_cartesian(ref, s, sd, sdd, d, dd, ddd)
    feasible = bool(ok.all()) and bool((sd >= -1e-6).all())
    pts = np.column_stack([t, x, y, th, v, a, k])
    return Trajectory(points=pts, frenet_source=(lat, lon), cost=0.0, feasible=feasible,
                      lateral_target=float(eval_end(lat)), horizon=float(horizon))


def eval_end(poly: MotionPoly) -> float:
    return sample(poly, np.array([poly.T]))[0, 0]


class CandidateSet(_SequenceABC):
    """Batch of candidate trajectories sharing one padded sample array.

    Behaves as a read-only sequence of :class:`Trajectory`; elements are
    built on access.  ``points`` has shape ``(P, K, 7)`` and row ``i`` is
    meaningful for its first ``n_points[i]`` samples.
    """

    def __init__(self, points, n_points, cost, horizon, lateral_target, sources, mode=""):
        self.points = points
        self.n_points = np.asarray(n_points, dtype=int)
        self.cost = np.asarray(cost, dtype=float)
        self.horizon = np.asarray(horizon, dtype=float)
        self.lateral_target = np.asarray(lateral_target, dtype=float)
        self.sources = list(sources)
        self.mode = mode

    @classmethod
    def empty(cls, mode=""):
        return cls(np.zeros((0, 0, 7)), [], [], [], [], [], mode)

    def __len__(self):
        return len(self.sources)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.subset(np.arange(len(self))[i])
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return Trajectory(points=self.points[i, : self.n_points[i]], frenet_source=self.sources[i],
                          cost=float(self.cost[i]), feasible=True, mode=self.mode,
                          lateral_target=float(self.lateral_target[i]), horizon=float(self.horizon[i]))

    def subset(self, selector) -> "CandidateSet":
        """Rows picked by a boolean mask or index array, in original order."""
        idx = np.arange(len(self))[np.asarray(selector)] if len(self) else np.zeros(0, dtype=int)
        return CandidateSet(self.points[idx], self.n_points[idx], self.cost[idx], self.horizon[idx],
                            self.lateral_target[idx], [self.sources[k] for k in idx], self.mode)
