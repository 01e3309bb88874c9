"""Direct sparse stereo visual odometry."""
from .odometry import FrameResult, StereoVO, refine_nonkeyframe
from .photometric import PATTERN, ActivePoint, gradient_weight, photometric_residual
from .points import select_candidate_points, static_stereo_depth, stereo_disparities
from .tracker import TrackResult, track_frame
from .window import (FrameData, Keyframe, KeyframeWindow, TrackedFrame, VOConfig, emit_velocity,
                     joint_optimize, marginalize, needs_keyframe)

__all__ = [
    "PATTERN", "ActivePoint", "FrameData", "FrameResult", "Keyframe", "KeyframeWindow",
    "StereoVO", "TrackResult", "TrackedFrame", "VOConfig", "emit_velocity", "gradient_weight",
    "joint_optimize", "marginalize", "needs_keyframe", "photometric_residual",
    "refine_nonkeyframe", "select_candidate_points", "static_stereo_depth",
    "stereo_disparities", "track_frame",
]
