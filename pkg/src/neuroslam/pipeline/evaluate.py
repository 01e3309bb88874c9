"""Trajectory error statistics of a map against ground truth."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..experience_map import MapGraph
from ..geometry import RigidTransform3, transform_to_planar_pose

# KITTI sequence 00 figures reported for the original system, printed for comparison only
REFERENCE_KITTI_00 = {"mean": 4.82, "median": 4.50, "rmse": 5.87, "min": 0.03, "max": 15.04}


@dataclass(frozen=True)
class TrajectoryStats:
    mean: float
    median: float
    rmse: float
    min: float
    max: float
    n: int

    @classmethod
    def from_errors(cls, errors) -> TrajectoryStats:
        e = np.asarray(errors, dtype=float)
        if e.size == 0:
            raise ValueError("no errors to summarise")
        return cls(float(e.mean()), float(np.median(e)), float(math.sqrt(np.mean(e * e))),
                   float(e.min()), float(e.max()), int(e.size))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Evaluation:
    anchored: TrajectoryStats  # first pose and heading pinned to ground truth
    fitted: TrajectoryStats  # least-squares rigid fit, secondary statistic
    errors: np.ndarray


def planar_ground_truth(poses) -> np.ndarray:
    """(N, 3) planar poses from transforms or an already planar array."""
    if len(poses) and isinstance(poses[0], RigidTransform3):
        return np.array([transform_to_planar_pose(p) for p in poses])
    return np.asarray(poses, dtype=float).reshape(-1, 3)


def associate(times, gt_times) -> np.ndarray:
    """Index of the nearest ground-truth timestamp for each query time (earlier on ties)."""
    gt = np.asarray(gt_times, dtype=float)
    t = np.asarray(times, dtype=float)
    idx = np.clip(np.searchsorted(gt, t), 1, max(len(gt) - 1, 1))
    if len(gt) == 1:
        return np.zeros(len(t), dtype=int)
    left = gt[idx - 1]
    right = gt[idx]
    return np.where(t - left <= right - t, idx - 1, idx)


def anchor_align(est: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rigidly move ``est`` so its first pose coincides with ``ref[0]``."""
    dth = ref[0, 2] - est[0, 2]
    c, s = math.cos(dth), math.sin(dth)
    R = np.array([[c, -s], [s, c]])
    xy = (est[:, :2] - est[0, :2]) @ R.T + ref[0, :2]
    return xy


def fit_align(est_xy: np.ndarray, ref_xy: np.ndarray) -> np.ndarray:
    """Least-squares rotation and translation of ``est_xy`` onto ``ref_xy`` (no scale)."""
    mu_e, mu_r = est_xy.mean(axis=0), ref_xy.mean(axis=0)
    A = (est_xy - mu_e).T @ (ref_xy - mu_r)
    U, _, Vt = np.linalg.svd(A)
    D = np.diag([1.0, np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0])
    R = Vt.T @ D @ U.T
    return (est_xy - mu_e) @ R.T + mu_r


def evaluate_poses(est: np.ndarray, times, gt, gt_times) -> Evaluation:
    est = np.asarray(est, dtype=float).reshape(-1, 3)
    gt = planar_ground_truth(gt)
    if len(gt) == 0:
        raise ValueError("ground truth is empty")
    if len(est) == 0:
        raise ValueError("need at least one estimated pose")
    if len(gt_times) != len(gt):
        raise ValueError("ground truth poses and timestamps differ in length")
    ref = gt[associate(times, gt_times)]
    anchored = anchor_align(est, ref)
    e_anchor = np.hypot(*(anchored - ref[:, :2]).T)
    fitted = fit_align(est[:, :2], ref[:, :2]) if len(est) > 1 else ref[:, :2]
    e_fit = np.hypot(*(fitted - ref[:, :2]).T)
    return Evaluation(TrajectoryStats.from_errors(e_anchor), TrajectoryStats.from_errors(e_fit),
                      e_anchor)


def evaluate(graph: MapGraph, ground_truth, timestamps) -> Evaluation:
    """Compare experience positions against ground truth associated by timestamp."""
    if not graph.experiences:
        raise ValueError("map has no experiences")
    est = graph.poses()
    times = [e.timestamp for e in graph.experiences]
    return evaluate_poses(est, times, ground_truth, timestamps)
