"""Ego state estimation from simulated GNSS, IMU and compass signals.

The filter runs on the planar state ``[x, y, theta, v, a]`` with a
constant-turn-rate-and-acceleration motion model.  GNSS fixes and the
compass give ``(x, y, yaw)`` measurements; the IMU yaw rate drives the
prediction and its forward acceleration can be folded in as a separate
scalar measurement of ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .errors import InputError
from .frenet import FrenetState, ReferenceLine, cartesian_to_frenet, wrap_angle

EARTH_RADIUS = 6378137.0

DEFAULT_Q = (0.01, 0.01, 0.001, 0.1, 0.5)
DEFAULT_GNSS_SIGMA = 0.5
DEFAULT_COMPASS_SIGMA = 0.05
DEFAULT_IMU_SIGMA = 0.1
#: Loose prior; a fresh estimate trusts the first fixes almost entirely.
DEFAULT_P0 = 10.0


def _wrap(a: float) -> float:
    """Wrap to ``(-pi, pi]``."""
    return float(wrap_angle(a))


# --- geodetic helpers ------------------------------------------------------

def local_to_geodetic(x: float, y: float, origin: Tuple[float, float]) -> Tuple[float, float]:
    """Equirectangular projection: local metres -> ``(lat, lon)`` degrees."""
    lat0, lon0 = origin
    lat = lat0 + math.degrees(y / EARTH_RADIUS)
    lon = lon0 + math.degrees(x / (EARTH_RADIUS * math.cos(math.radians(lat0))))
    return lat, lon


def geodetic_to_local(lat: float, lon: float, origin: Tuple[float, float]) -> Tuple[float, float]:
    """Inverse of :func:`local_to_geodetic`."""
    lat0, lon0 = origin
    y = math.radians(lat - lat0) * EARTH_RADIUS
    x = math.radians(lon - lon0) * EARTH_RADIUS * math.cos(math.radians(lat0))
    return x, y


@dataclass(frozen=True)
class NavSignals:
    """One sample of the navigation sensors.

    Position is geodetic (degrees, metres of altitude).  Angular velocity is
    rad/s and linear acceleration m/s^2, both in the body frame with ``x``
    forward.  Only ``va_z``, ``al_x`` and ``yaw`` feed the planar filter.
    """

    lat: float
    lon: float
    alt: float
    va_x: float
    va_y: float
    va_z: float
    al_x: float
    al_y: float
    al_z: float
    yaw: float

    def __post_init__(self):
        vals = (self.lat, self.lon, self.alt, self.va_x, self.va_y, self.va_z,
                self.al_x, self.al_y, self.al_z, self.yaw)
        if not all(math.isfinite(v) for v in vals):
            raise InputError("navigation signals must be finite")
        object.__setattr__(self, "yaw", _wrap(self.yaw))

    def local_position(self, origin: Tuple[float, float]) -> Tuple[float, float, float]:
        x, y = geodetic_to_local(self.lat, self.lon, origin)
        return x, y, self.alt


# --- estimate and filter steps ---------------------------------------------

@dataclass(frozen=True)
class EgoEstimate:
    x: float
    y: float
    theta: float
    v: float
    a: float
    covariance: np.ndarray = field(default_factory=lambda: DEFAULT_P0 * np.eye(5), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap(self.theta))
        P = np.array(self.covariance, dtype=float)
        if P.shape != (5, 5):
            raise InputError(f"covariance must be 5x5, got {P.shape}")
        P = 0.5 * (P + P.T)
        P.setflags(write=False)
        object.__setattr__(self, "covariance", P)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.a])

    @classmethod
    def from_vector(cls, z, P) -> "EgoEstimate":
        return cls(float(z[0]), float(z[1]), float(z[2]), float(z[3]), float(z[4]), P)


def kf_predict(est: EgoEstimate, imu: Tuple[float, float], dt: float,
               Q: Sequence[float] = DEFAULT_Q) -> EgoEstimate:
    """Propagate the estimate by ``dt`` with IMU input ``(yaw_rate, forward_accel)``.

    The forward acceleration is not used by the motion model (``a`` is
    held); see :func:`kf_update_accel` for folding it in.
    """
    if not dt > 0:
        raise InputError("dt must be positive")
    omega = float(imu[0])
    x, y, th, v, a = est.vector
    c, s = math.cos(th), math.sin(th)
    z = np.array([x + v * c * dt, y + v * s * dt, th + omega * dt, v + a * dt, a])
    F = np.eye(5)
    F[0, 2] = -v * s * dt
    F[0, 3] = c * dt
    F[1, 2] = v * c * dt
    F[1, 3] = s * dt
    F[3, 4] = dt
    P = F @ est.covariance @ F.T + np.diag(Q) * dt
    return EgoEstimate.from_vector(z, P)


_H_POSE = np.zeros((3, 5))
_H_POSE[0, 0] = _H_POSE[1, 1] = _H_POSE[2, 2] = 1.0


def _joseph(P, K, H, R):
    IKH = np.eye(5) - K @ H
    return IKH @ P @ IKH.T + K @ R @ K.T


def kf_update(est: EgoEstimate, meas: Tuple[float, float, float], R) -> EgoEstimate:
    """Measurement update on ``(x, y, yaw)``; the yaw residual is wrapped.

    ``R`` is a 3x3 covariance or a length-3 diagonal.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim == 1:
        R = np.diag(R)
    if R.shape != (3, 3) or np.any(np.linalg.eigvalsh(0.5 * (R + R.T)) <= 0):
        raise InputError("measurement noise must be a 3x3 positive definite matrix")
    P = est.covariance
    H = _H_POSE
    r = np.array([meas[0] - est.x, meas[1] - est.y, _wrap(meas[2] - est.theta)])
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    z = est.vector + K @ r
    return EgoEstimate.from_vector(z, _joseph(P, K, H, R))


def kf_update_accel(est: EgoEstimate, accel: float, sigma: float = DEFAULT_IMU_SIGMA) -> EgoEstimate:
    """Scalar update of ``a`` from the IMU forward acceleration."""
    if not sigma > 0:
        raise InputError("sigma must be positive")
    H = np.zeros((1, 5))
    H[0, 4] = 1.0
    R = np.array([[sigma * sigma]])
    P = est.covariance
    S = H @ P @ H.T + R
    K = (P @ H.T) / S[0, 0]
    z = est.vector + (K * (accel - est.a)).ravel()
    return EgoEstimate.from_vector(z, _joseph(P, K, H, R))


def estimate_to_frenet(est: EgoEstimate, ref: ReferenceLine) -> FrenetState:
    return cartesian_to_frenet(ref, (est.x, est.y, est.theta, est.v, est.a))


class LocalizationFilter:
    """Stateful wrapper that consumes :class:`NavSignals` each tick."""

    def __init__(self, initial: EgoEstimate, origin: Tuple[float, float] = (0.0, 0.0),
                 Q: Sequence[float] = DEFAULT_Q, gnss_sigma: float = DEFAULT_GNSS_SIGMA,
                 compass_sigma: float = DEFAULT_COMPASS_SIGMA, imu_sigma: float = DEFAULT_IMU_SIGMA,
                 use_accel: bool = True):
        self.estimate = initial
        self.origin = origin
        self.Q = tuple(Q)
        self.R = np.diag([max(gnss_sigma, 1e-6) ** 2] * 2 + [max(compass_sigma, 1e-6) ** 2])
        self.imu_sigma = max(imu_sigma, 1e-6)
        self.use_accel = use_accel

    def step(self, signals: NavSignals, dt: float) -> EgoEstimate:
        est = kf_predict(self.estimate, (signals.va_z, signals.al_x), dt, self.Q)
        x, y, _ = signals.local_position(self.origin)
        est = kf_update(est, (x, y, signals.yaw), self.R)
        if self.use_accel:
            est = kf_update_accel(est, signals.al_x, self.imu_sigma)
        self.estimate = est
        return est
