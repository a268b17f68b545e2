"""Disk footprints and spatio-temporal collision filtering.

Vehicles are covered by three equal disks on their longitudinal axis at
``0`` and ``+-l/3`` with radius ``sqrt(w^2/4 + l^2/36)``; each disk then
reaches exactly the corners of its third of the rectangle.  Pedestrians
use a single disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError
from .frenet import THETA_COL, X_COL, Y_COL, CandidateSet, Trajectory

DEFAULT_PEDESTRIAN_RADIUS = 0.4


@dataclass(frozen=True)
class DiskSet:
    """Disks in world frame plus the rectangle they were built from."""

    centers: np.ndarray  # (n, 2)
    radius: float
    source_footprint: Tuple[float, float, Tuple[float, float, float]]

    @property
    def disks(self) -> List[Tuple[float, float, float]]:
        return [(float(cx), float(cy), self.radius) for cx, cy in self.centers]

    def __len__(self):
        return len(self.centers)


def disk_radius(w: float, l: float) -> float:
    return math.sqrt(w * w / 4.0 + l * l / 36.0)


def disk_model(pose: Sequence[float], w: float, l: float) -> DiskSet:
    """Three-disk cover of a ``w`` x ``l`` rectangle at ``pose = (x, y, theta)``."""
    if not (w > 0 and l > 0):
        raise InputError(f"footprint dimensions must be positive, got w={w}, l={l}")
    x, y, th = (float(p) for p in pose)
    c, s = math.cos(th), math.sin(th)
    offs = np.array([0.0, l / 3.0, -l / 3.0])
    centers = np.column_stack([x + offs * c, y + offs * s])
    return DiskSet(centers=centers, radius=disk_radius(w, l), source_footprint=(w, l, (x, y, th)))


def pedestrian_disk(pose: Sequence[float], w: float, l: float, radius: float = DEFAULT_PEDESTRIAN_RADIUS) -> DiskSet:
    """Single disk; grown to the half-diagonal if the footprint needs it."""
    x, y, th = (float(p) for p in pose)
    r = max(radius, 0.5 * math.hypot(w, l))
    return DiskSet(centers=np.array([[x, y]]), radius=r, source_footprint=(w, l, (x, y, th)))


def footprint_disks(kind: str, pose, dims, pedestrian_radius: float = DEFAULT_PEDESTRIAN_RADIUS) -> DiskSet:
    w, l = dims
    if kind == "pedestrian":
        return pedestrian_disk(pose, w, l, pedestrian_radius)
    return disk_model(pose, w, l)


@dataclass
class CheckStats:
    """Counts individual disk-pair distance tests."""

    pair_tests: int = 0


def pairwise_collides(a: DiskSet, b: DiskSet, stats: Optional[CheckStats] = None) -> bool:
    """True iff some disk pair is strictly closer than the sum of radii."""
    diff = a.centers[:, None, :] - b.centers[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    if stats is not None:
        stats.pair_tests += d2.size
    reach = a.radius + b.radius
    return bool((d2 < reach * reach).any())


def rectangle_corners(pose, w, l) -> np.ndarray:
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    hl, hw = l / 2.0, w / 2.0
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    R = np.array([[c, -s], [s, c]])
    return local @ R.T + np.array([x, y])


def rectangles_overlap(pose_a, dims_a, pose_b, dims_b) -> bool:
    """Exact separating-axis test for two oriented rectangles.

    ``dims`` are ``(w, l)``.  Touching edges count as overlap.
    """
    ca = rectangle_corners(pose_a, *dims_a)
    cb = rectangle_corners(pose_b, *dims_b)
    for th in (pose_a[2], pose_b[2]):
        for axis in ((math.cos(th), math.sin(th)), (-math.sin(th), math.cos(th))):
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def _resample_prediction(points: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Prediction ``(t, x, y, theta, ...)`` rows at ``times``; held after its end."""
    t = points[:, 0]
    if len(t) == len(times) and np.allclose(t, times, atol=1e-9):
        return points[:, 1:4]
    x = np.interp(times, t, points[:, 1])
    y = np.interp(times, t, points[:, 2])
    th = np.interp(times, t, np.unwrap(points[:, 3]))
    return np.column_stack([x, y, th])


def _obstacle_disks_over_time(pred, times, pedestrian_radius):
    """Disk centres ``(K, n, 2)`` and radius for one predicted obstacle."""
    pose = _resample_prediction(pred.points, times)
    w, l = pred.dims
    if pred.kind == "pedestrian":
        r = max(pedestrian_radius, 0.5 * math.hypot(w, l))
        return pose[:, None, :2], r, 0.0
    offs = np.array([0.0, l / 3.0, -l / 3.0])
    c, s = np.cos(pose[:, 2]), np.sin(pose[:, 2])
    centers = np.stack([pose[:, 0:1] + offs * c[:, None], pose[:, 1:2] + offs * s[:, None]], axis=-1)
    return centers, disk_radius(w, l), l / 3.0


def trajectory_collision_free(chi: Trajectory, predictions: Sequence, ego_dims: Tuple[float, float],
                              pedestrian_radius: float = DEFAULT_PEDESTRIAN_RADIUS,
                              stats: Optional[CheckStats] = None) -> bool:
    """Check every trajectory sample against every predicted obstacle pose.

    Obstacles are held at their last predicted pose if the prediction is
    shorter than the trajectory.
    """
    w, l = ego_dims
    times = chi.t
    for pred in predictions:
        centers, r_obs, _ = _obstacle_disks_over_time(pred, times, pedestrian_radius)
        for k in range(len(times)):
            ego = disk_model((chi.x[k], chi.y[k], chi.theta[k]), w, l)
            obs = DiskSet(centers=centers[k], radius=r_obs, source_footprint=(pred.dims[0], pred.dims[1], (0, 0, 0)))
            if pairwise_collides(ego, obs, stats):
                return False
    return True


def filter_collision_free(candidates, predictions: Sequence, ego_dims: Tuple[float, float],
                          pedestrian_radius: float = DEFAULT_PEDESTRIAN_RADIUS):
    """Collision-free subset of ``candidates``, order preserved.

    A :class:`CandidateSet` is checked in one vectorised pass with a
    bounding-circle broad phase; a plain list falls back to
    :func:`trajectory_collision_free` per element.
    """
    if not predictions or len(candidates) == 0:
        return candidates
    if not isinstance(candidates, CandidateSet):
        return [c for c in candidates if trajectory_collision_free(c, predictions, ego_dims, pedestrian_radius)]
    return candidates.subset(batch_collision_free(candidates, predictions, ego_dims, pedestrian_radius))


def batch_collision_free(cands: CandidateSet, predictions: Sequence, ego_dims,
                         pedestrian_radius: float = DEFAULT_PEDESTRIAN_RADIUS) -> np.ndarray:
    """Boolean mask over ``cands``: True where no obstacle disk is hit."""
    P, K, _ = cands.points.shape
    w, l = ego_dims
    r_ego = disk_radius(w, l)
    off_ego = l / 3.0
    times = cands.points[0, :, 0] if P else np.zeros(0)
    # a candidate row is padded past its own horizon; ignore those samples
    valid = np.arange(K)[None, :] < cands.n_points[:, None]

    # padded samples become NaN so every distance test on them is False
    ex = np.where(valid, cands.points[:, :, X_COL], np.nan)
    ey = np.ascontiguousarray(cands.points[:, :, Y_COL])
    ego_offs = np.array([0.0, off_ego, -off_ego])

    obs = [_obstacle_disks_over_time(p, times, pedestrian_radius) for p in predictions]
    M = len(obs)
    # all obstacles as three disks; a pedestrian's single disk is repeated
    oc = np.empty((M, K, 3, 2))
    for m, (centers, _, _) in enumerate(obs):
        oc[m] = centers
    ox = np.ascontiguousarray(oc[:, :, 0, 0])
    oy = np.ascontiguousarray(oc[:, :, 0, 1])
    r_obs = np.array([o[1] for o in obs])
    # broad phase against the middle disk with a bound covering every disk pair
    bound = r_ego + r_obs + off_ego + np.array([o[2] for o in obs])  # (M,)
    hit = np.zeros(P, dtype=bool)
    # skip (obstacle, time) columns that are clear of the whole candidate cloud
    lo_x = np.where(valid, ex, np.inf).min(axis=0)
    hi_x = np.where(valid, ex, -np.inf).max(axis=0)
    lo_y = np.where(valid, ey, np.inf).min(axis=0)
    hi_y = np.where(valid, ey, -np.inf).max(axis=0)
    gap_x = np.maximum(lo_x[None] - ox, ox - hi_x[None])
    gap_y = np.maximum(lo_y[None] - oy, oy - hi_y[None])
    mi, ki = np.nonzero((gap_x < bound[:, None]) & (gap_y < bound[:, None]))
    if len(mi) == 0:
        return ~hit
    dx = ex[:, ki] - ox[mi, ki]
    dy = ey[:, ki] - oy[mi, ki]
    dx *= dx
    dy *= dy
    dx += dy
    pi, col = np.nonzero(dx < bound[mi] ** 2)
    if len(pi) == 0:
        return ~hit
    mi, ki = mi[col], ki[col]
    # exact disk pairs at the flagged samples: (3 ego, 3 obstacle, N)
    th = cands.points[pi, ki, THETA_COL]
    egx = ex[pi, ki] + ego_offs[:, None] * np.cos(th)
    egy = ey[pi, ki] + ego_offs[:, None] * np.sin(th)
    c = oc[mi, ki].T  # (2, 3, N)
    ddx = egx[:, None, :] - c[0][None]
    ddy = egy[:, None, :] - c[1][None]
    ddx *= ddx
    ddy *= ddy
    ddx += ddy
    reach = r_ego + r_obs[mi]
    coll = (ddx < reach * reach).any(axis=(0, 1))
    hit[pi[coll]] = True
    return ~hit


def min_clearance(chi: Trajectory, obstacle_poses: np.ndarray, obstacle_kind: str, obstacle_dims,
                  ego_dims, pedestrian_radius: float = DEFAULT_PEDESTRIAN_RADIUS) -> float:
    """Smallest disk-to-disk gap (centre distance minus radii) over the trajectory.

    ``obstacle_poses`` holds one ``(x, y, theta)`` row per trajectory sample.
    """
    best = math.inf
    for k in range(len(chi.t)):
        ego = disk_model((chi.x[k], chi.y[k], chi.theta[k]), *ego_dims)
        obs = footprint_disks(obstacle_kind, obstacle_poses[k], obstacle_dims, pedestrian_radius)
        diff = ego.centers[:, None, :] - obs.centers[None, :, :]
        gap = np.sqrt((diff ** 2).sum(-1)).min() - ego.radius - obs.radius
        best = min(best, float(gap))
    return best
