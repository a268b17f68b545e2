"""Quintic and quartic 1-D motion polynomials.

Coefficients are stored lowest degree first, so a quintic is

    p(t) = c0 + c1 t + c2 t^2 + c3 t^3 + c4 t^4 + c5 t^5,   0 <= t <= T

and a quartic simply has no ``c5`` term.  Both are solved from their
boundary conditions in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DomainError, HorizonError, InputError

#: Horizons shorter than this are rejected; the boundary system scales as T^-5.
MIN_HORIZON = 1e-3

_EVAL_SLACK = 1e-9


@dataclass(frozen=True)
class MotionPoly:
    """A quartic or quintic polynomial defined on ``[0, T]``."""

    coeffs: Tuple[float, ...]
    T: float

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) not in (5, 6):
            raise InputError(f"expected 5 or 6 coefficients, got {len(coeffs)}")
        if not all(math.isfinite(c) for c in coeffs):
            raise InputError("coefficients must be finite")
        _check_horizon(self.T)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "T", float(self.T))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def padded(self) -> np.ndarray:
        """Coefficients as a length-6 array (quartics get a zero ``c5``)."""
        out = np.zeros(6)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def evaluate(self, t: float) -> Tuple[float, float, float, float]:
        return eval_poly(self, t)

    def jerk_integral(self) -> float:
        return jerk_integral(self)

    def max_abs_jerk(self) -> float:
        return max_abs_jerk(self)


def _trusted(coeffs, T) -> MotionPoly:
    """Build without re-validating; for solver output only."""
    poly = object.__new__(MotionPoly)
    object.__setattr__(poly, "coeffs", coeffs)
    object.__setattr__(poly, "T", float(T))
    return poly


def _check_horizon(T):
    if not isinstance(T, (int, float, np.floating, np.integer)) or not math.isfinite(T):
        raise HorizonError(f"horizon must be a finite number, got {T!r}")
    if T < MIN_HORIZON:
        raise HorizonError(f"horizon must be >= {MIN_HORIZON} s, got {T}")


def _check_finite(values, what):
    for v in values:
        if not math.isfinite(v):
            raise InputError(f"{what} must be finite, got {tuple(values)}")


def solve_quintic(start: Sequence[float], end: Sequence[float], T: float) -> MotionPoly:
    """Quintic meeting position, velocity and acceleration at both ends.

    Args:
        start: ``(pos, vel, acc)`` at ``t = 0``.
        end: ``(pos, vel, acc)`` at ``t = T``.
        T: horizon in seconds.
    """
    _check_horizon(T)
    p0, v0, a0 = (float(x) for x in start)
    p1, v1, a1 = (float(x) for x in end)
    _check_finite((p0, v0, a0), "start")
    _check_finite((p1, v1, a1), "end")

    h = p1 - p0
    T2 = T * T
    T3 = T2 * T
    c3 = (20.0 * h - (8.0 * v1 + 12.0 * v0) * T - (3.0 * a0 - a1) * T2) / (2.0 * T3)
    c4 = (-30.0 * h + (14.0 * v1 + 16.0 * v0) * T + (3.0 * a0 - 2.0 * a1) * T2) / (2.0 * T3 * T)
    c5 = (12.0 * h - 6.0 * (v1 + v0) * T + (a1 - a0) * T2) / (2.0 * T3 * T2)
    return _trusted((p0, v0, 0.5 * a0, c3, c4, c5), T)


def solve_quartic(start: Sequence[float], end: Sequence[float], T: float) -> MotionPoly:
    """Quartic with free terminal position.

    Args:
        start: ``(pos, vel, acc)`` at ``t = 0``.
        end: ``(vel, acc)`` at ``t = T``.
        T: horizon in seconds.
    """
    _check_horizon(T)
    p0, v0, a0 = (float(x) for x in start)
    v1, a1 = (float(x) for x in end)
    _check_finite((p0, v0, a0), "start")
    _check_finite((v1, a1), "end")

    dv = v1 - v0 - a0 * T
    c4 = ((a1 - a0) * T - 2.0 * dv) / (4.0 * T ** 3)
    c3 = (dv - 4.0 * c4 * T ** 3) / (3.0 * T * T)
    return _trusted((p0, v0, 0.5 * a0, c3, c4), T)


def _derivatives(c: np.ndarray, t):
    """Value and first three derivatives of a padded coefficient array."""
    c0, c1, c2, c3, c4, c5 = c
    pos = c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))))
    vel = c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)))
    acc = 2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5))
    jerk = 6.0 * c3 + t * (24.0 * c4 + t * 60.0 * c5)
    return pos, vel, acc, jerk


def eval_poly(poly: MotionPoly, t: float) -> Tuple[float, float, float, float]:
    """Return ``(pos, vel, acc, jerk)`` at time ``t`` in ``[0, T]``."""
    if not (-_EVAL_SLACK <= t <= poly.T + _EVAL_SLACK):
        raise DomainError(f"t={t} outside [0, {poly.T}]")
    t = min(max(t, 0.0), poly.T)
    return tuple(float(v) for v in _derivatives(poly.padded(), t))


def sample(poly: MotionPoly, times: np.ndarray, hold: bool = True):
    """Vectorised evaluation at many times.

    Times past ``T`` continue from the terminal state with constant
    acceleration (zero jerk) when ``hold`` is set; for terminal states with
    zero velocity and acceleration this simply holds the end value.
    """
    return sample_many([poly], times, hold=hold)[:, 0]


def sample_many(polys: Sequence[MotionPoly], times, hold: bool = True) -> np.ndarray:
    """Evaluate several polynomials on one time grid.

    Returns an array of shape ``(4, len(polys), len(times))`` holding
    position, velocity, acceleration and jerk.
    """
    times = np.asarray(times, dtype=float)
    if not hold and len(polys) and (times.max(initial=0.0) > min(p.T for p in polys) + _EVAL_SLACK):
        raise DomainError("sample times exceed polynomial horizon")
    C = np.array([p.padded() for p in polys]).reshape(-1, 6)
    T = np.array([p.T for p in polys], dtype=float).reshape(-1, 1)
    t = np.minimum(times[None, :], T)
    pos, vel, acc, jerk = _derivatives(C.T[:, :, None], t)
    tau = times[None, :] - t
    over = tau > 0.0
    if over.any():
        pos = pos + vel * tau + 0.5 * acc * tau * tau
        vel = vel + acc * tau
        jerk = np.where(over, 0.0, jerk)
    return np.stack([pos, vel, acc, jerk])


def jerk_integral(poly: MotionPoly) -> float:
    """Closed-form integral of the squared third derivative over ``[0, T]``."""
    c = poly.padded()
    # jerk(t) = j0 + j1 t + j2 t^2
    j0, j1, j2 = 6.0 * c[3], 24.0 * c[4], 60.0 * c[5]
    T = poly.T
    return float(
        j0 * j0 * T
        + j0 * j1 * T ** 2
        + (j1 * j1 + 2.0 * j0 * j2) * T ** 3 / 3.0
        + j1 * j2 * T ** 4 / 2.0
        + j2 * j2 * T ** 5 / 5.0
    )


def max_abs_jerk(poly: MotionPoly) -> float:
    """Exact ``max |jerk(t)|`` on ``[0, T]``: endpoints plus the interior vertex."""
    c = poly.padded()
    j0, j1, j2 = 6.0 * c[3], 24.0 * c[4], 60.0 * c[5]
    T = poly.T
    values = [abs(j0), abs(j0 + j1 * T + j2 * T * T)]
    if j2 != 0.0:
        tv = -j1 / (2.0 * j2)
        if 0.0 < tv < T:
            values.append(abs(j0 + j1 * tv + j2 * tv * tv))
    return float(max(values))


def max_abs_jerk_many(polys: Sequence[MotionPoly]) -> np.ndarray:
    """:func:`max_abs_jerk` for several polynomials at once."""
    C = np.array([p.padded() for p in polys]).reshape(-1, 6)
    T = np.array([p.T for p in polys], dtype=float)
    j0, j1, j2 = 6.0 * C[:, 3], 24.0 * C[:, 4], 60.0 * C[:, 5]
    best = np.maximum(np.abs(j0), np.abs(j0 + j1 * T + j2 * T * T))
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = np.where(j2 != 0.0, -j1 / (2.0 * j2), -1.0)
    inner = (tv > 0.0) & (tv < T)
    return np.where(inner, np.maximum(best, np.abs(j0 + j1 * tv + j2 * tv * tv)), best)
