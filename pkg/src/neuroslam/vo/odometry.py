"""Frame-by-frame stereo visual odometry driver."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..geometry import CameraIntrinsics, PlanarVelocity, RigidTransform3, relative_transform
from .points import (DepthRefineConfig, StereoConfig, refine_depths, select_candidate_points,
                     stereo_disparities)
from .tracker import track_frame
from .window import (FrameData, Keyframe, KeyframeWindow, PointSet, TrackedFrame, VOConfig,
                     emit_velocity, joint_optimize, marginalize, needs_keyframe)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameResult:
    index: int
    timestamp: float
    pose: RigidTransform3
    affine: tuple[float, float]
    is_keyframe: bool
    tracking_lost: bool
    velocity: PlanarVelocity | None  # set when a keyframe produced a new velocity


def refine_nonkeyframe(window: KeyframeWindow, tracked: TrackedFrame,
                       cfg: DepthRefineConfig | None = None) -> np.ndarray:
    """Refine the latest keyframe's candidate depths with a tracked frame.

    Returns the mask of candidates that received an update.
    """
    kf = window.latest()
    cand = kf.candidates
    if len(cand) == 0:
        return np.zeros(0, dtype=bool)
    t_ji = relative_transform(kf.pose, tracked.pose)
    d, v, ok = refine_depths(kf.left[0].image, tracked.frame.left, cand.pixels, cand.idepth,
                             cand.ivar, t_ji, window.k, kf.affine, tracked.affine, cfg)
    kf.candidates = PointSet(cand.pixels, d, v)
    return ok


def init_candidates(kf: Keyframe, k: CameraIntrinsics, cfg: VOConfig) -> PointSet:
    """Select candidate pixels in a keyframe and initialise them by static stereo."""
    px = select_candidate_points(kf.frame.left, cfg.block_rows, cfg.block_cols, cfg.cell,
                                 cfg.g_const)
    if len(px) == 0:
        return PointSet()
    scfg = StereoConfig(search_range=cfg.stereo_search_range)
    disp = stereo_disparities(kf.frame.left, kf.frame.right, px, cfg.stereo_search_range, scfg)
    ok = np.isfinite(disp) & (disp > 0)
    fb = k.fx * k.baseline
    idepth = disp[ok] / fb
    ivar = np.full(idepth.shape, (scfg.disparity_sigma / fb) ** 2)
    return PointSet(px[ok].astype(float), idepth, ivar)


class StereoVO:
    """Tracks frames, maintains the keyframe window and emits keyframe velocities."""

    def __init__(self, k: CameraIntrinsics, config: VOConfig | None = None):
        self.k = k
        self.config = config or VOConfig()
        self.window = KeyframeWindow(k, self.config)
        self._next_id = 0
        self._index = 0
        self._last_pose: RigidTransform3 | None = None
        self._prev_pose: RigidTransform3 | None = None
        self._last_affine = (0.0, 0.0)
        self._last_time: float | None = None

    def _add_keyframe(self, frame: FrameData, pose, affine) -> Keyframe:
        kf = Keyframe(self._next_id, frame, pose, self.config.pyramid_levels, affine)
        self._next_id += 1
        if self.window.keyframes:
            prev = self.window.latest()
            if len(prev.candidates):
                prev.set_points(prev.points.extend(prev.candidates))
                prev.candidates = PointSet()
        kf.candidates = init_candidates(kf, self.k, self.config)
        if not self.window.keyframes:
            # nothing to track against yet: the first keyframe's points go live at once
            kf.set_points(kf.candidates)
            kf.candidates = PointSet()
        self.window.keyframes.append(kf)
        return kf

    def process(self, frame: FrameData) -> FrameResult:
        if self._last_time is not None and not frame.timestamp > self._last_time:
            raise ValueError(f"timestamp {frame.timestamp} is not after {self._last_time}")
        idx = self._index
        self._index += 1
        self._last_time = frame.timestamp
        if not self.window.keyframes:
            pose = RigidTransform3.identity()
            self._add_keyframe(frame, pose, (frame.affine_a, frame.affine_b))
            self._prev_pose, self._last_pose = pose, pose
            self._last_affine = (frame.affine_a, frame.affine_b)
            return FrameResult(idx, frame.timestamp, pose, self._last_affine, True, False, None)

        motion = relative_transform(self._last_pose, self._prev_pose)
        predicted = (self._last_pose @ motion).reorthonormalized()
        lost = False
        if self.window.n_points() == 0:
            lost = True
        else:
            res = track_frame(self.window, frame, predicted, self._last_affine)
            lost = res.lost
        if lost:
            log.warning("frame %d: tracking lost, using constant-velocity pose", idx)
            pose, affine = predicted, self._last_affine
        else:
            pose, affine = res.pose, res.affine
        tracked = TrackedFrame(frame, pose, affine)
        velocity = None
        is_kf = not lost and needs_keyframe(self.window, tracked, self.config.flow_threshold,
                                            self.config.brightness_threshold)
        if is_kf:
            self._add_keyframe(frame, pose, affine)
            joint_optimize(self.window, self.config.joint_iterations)
            marginalize(self.window)
            pose, affine = self.window.latest().pose, self.window.latest().affine
            velocity = emit_velocity(self.window)
        elif not lost:
            refine_nonkeyframe(self.window, tracked)
        self._prev_pose, self._last_pose = self._last_pose, pose
        self._last_affine = tuple(affine)
        return FrameResult(idx, frame.timestamp, pose, tuple(affine), is_kf, lost, velocity)
