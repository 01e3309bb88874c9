"""Synthetic worlds: a rendered textured plane and planar velocity traces.

Both generators are deterministic given their seed and write the same file
layouts the loaders read, plus ground truth.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import CameraIntrinsics, RigidTransform3, planar_pose_to_transform, wrap_pi


class PlaneTexture:
    """Smooth band-limited texture on the world plane ``z = depth``."""

    def __init__(self, seed: int = 0, n_waves: int = 24, min_wavelength: float = 0.15,
                 max_wavelength: float = 3.0, mean: float = 128.0, amplitude: float = 90.0):
        rng = np.random.default_rng(seed)
        angle = rng.uniform(0, 2 * math.pi, n_waves)
        lam = np.exp(rng.uniform(math.log(min_wavelength), math.log(max_wavelength), n_waves))
        self.kx = 2 * math.pi * np.cos(angle) / lam
        self.ky = 2 * math.pi * np.sin(angle) / lam
        self.phase = rng.uniform(0, 2 * math.pi, n_waves)
        amp = rng.uniform(0.5, 1.0, n_waves)
        self.amp = amp * amplitude / math.sqrt(np.sum(amp**2) / 2) / 2.2
        self.mean = mean

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        acc = np.full(np.shape(x), self.mean, dtype=float)
        for kx, ky, ph, a in zip(self.kx, self.ky, self.phase, self.amp):
            acc += a * np.sin(kx * x + ky * y + ph)
        return acc


def render_plane(texture: PlaneTexture, k: CameraIntrinsics, pose: RigidTransform3,
                 depth: float, gain: float = 0.0, offset: float = 0.0) -> np.ndarray:
    """Render the plane ``z = depth`` (world frame) seen from camera ``pose``.

    The brightness transfer is ``exp(gain) * I + offset``.
    """
    v, u = np.mgrid[0 : k.height, 0 : k.width].astype(float)
    rays = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    d = rays @ pose.rotation.T
    o = pose.translation
    s = (depth - o[2]) / d[..., 2]
    if np.any(s <= 0):
        raise ValueError("plane not in front of the camera for every pixel")
    x = o[0] + s * d[..., 0]
    y = o[1] + s * d[..., 1]
    return math.exp(gain) * texture(x, y) + offset


def right_pose(pose: RigidTransform3, k: CameraIntrinsics) -> RigidTransform3:
    return pose @ RigidTransform3(np.eye(3), np.array([k.baseline, 0.0, 0.0]))


def render_stereo(texture: PlaneTexture, k: CameraIntrinsics, pose: RigidTransform3,
                  depth: float, gain: float = 0.0, offset: float = 0.0):
    left = render_plane(texture, k, pose, depth, gain, offset)
    right = render_plane(texture, k, right_pose(pose, k), depth, gain, offset)
    return left, right


def constant_disparity_pair(disparity: float, width: int = 160, height: int = 120,
                            seed: int = 0, wavelength: tuple[float, float] = (6.0, 24.0)):
    """Left/right rasters where the right view is the left shifted by ``disparity`` px."""
    tex = PlaneTexture(seed, min_wavelength=wavelength[0], max_wavelength=wavelength[1])
    v, u = np.mgrid[0:height, 0:width].astype(float)
    return tex(u, v), tex(u + disparity, v)


def default_intrinsics(width: int = 240, height: int = 180) -> CameraIntrinsics:
    return CameraIntrinsics(200.0, 200.0, (width - 1) / 2.0, (height - 1) / 2.0, 0.5,
                            width, height)


@dataclass
class PhotometricSpec:
    n_frames: int = 10
    width: int = 240
    height: int = 180
    fx: float = 200.0
    baseline: float = 0.5
    plane_depth: float = 6.0
    step_forward: float = 0.05
    step_lateral: float = 0.0
    step_yaw: float = 0.0
    frame_rate: float = 10.0
    brightness_gain: float = 0.0
    brightness_offset: float = 0.0

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.fx, self.fx, (self.width - 1) / 2.0,
                                (self.height - 1) / 2.0, self.baseline, self.width, self.height)

    def poses(self) -> list[RigidTransform3]:
        out, x, y, th = [], 0.0, 0.0, 0.0
        for _ in range(self.n_frames):
            out.append(planar_pose_to_transform(x, y, th))
            x += self.step_forward * math.cos(th) - self.step_lateral * math.sin(th)
            y += self.step_forward * math.sin(th) + self.step_lateral * math.cos(th)
            th += self.step_yaw
        return out


@dataclass
class TrajectorySpec:
    """Polygonal waypoint path driven at constant speed; cues at revisits."""

    waypoints: list[tuple[float, float]] = field(
        default_factory=lambda: [(0.0, 0.0), (25.0, 0.0), (25.0, 25.0), (0.0, 25.0), (0.0, 0.0)]
    )
    speed: float = 1.0
    dt: float = 0.5
    revisit_cue: bool = True
    velocity_noise: float = 0.0
    heading_noise: float = 0.0


@dataclass
class TrajectoryWorld:
    times: np.ndarray
    omega: np.ndarray
    speed: np.ndarray
    scene: np.ndarray
    poses: np.ndarray  # (N, 3) planar ground truth


def _segment_steps(spec: TrajectorySpec):
    """Per-step (turn, distance) pairs along the waypoint polygon."""
    pts = np.asarray(spec.waypoints, dtype=float)
    start_heading = math.atan2(pts[1, 1] - pts[0, 1], pts[1, 0] - pts[0, 0])
    heading = start_heading
    steps = []
    step_len = spec.speed * spec.dt
    for a, b in zip(pts[:-1], pts[1:]):
        seg_heading = math.atan2(b[1] - a[1], b[0] - a[0])
        turn = wrap_pi(seg_heading - heading)
        heading = seg_heading
        n = max(1, int(round(math.hypot(*(b - a)) / step_len)))
        length = math.hypot(*(b - a)) / n
        for i in range(n):
            steps.append((turn if i == 0 else 0.0, length))
    if np.allclose(pts[0], pts[-1]):
        # closed path: turn in place back to the start heading so the revisit is a full pose
        steps.append((wrap_pi(start_heading - heading), 0.0))
    return start_heading, steps


def synthesize_trajectory(spec: TrajectorySpec, seed: int = 0) -> TrajectoryWorld:
    """Velocity trace along the waypoint path.

    Each step first turns in place by the corner angle then moves straight, so
    the first row is the start pose and every later row carries the velocities
    that carried the robot there. A closed path ends with an in-place turn back
    to the start heading. Every row gets a fresh scene label except that final
    revisit of the start pose, which repeats label 0 when ``revisit_cue`` is set.
    """
    rng = np.random.default_rng(seed)
    heading0, steps = _segment_steps(spec)
    n = len(steps) + 1
    times = np.arange(n) * spec.dt
    omega = np.zeros(n)
    speed = np.zeros(n)
    poses = np.zeros((n, 3))
    x, y, th = 0.0 + spec.waypoints[0][0], 0.0 + spec.waypoints[0][1], heading0
    poses[0] = (x, y, th)
    for i, (turn, length) in enumerate(steps, start=1):
        th = th + turn
        x += length * math.cos(th)
        y += length * math.sin(th)
        poses[i] = (x, y, wrap_pi(th))
        omega[i] = turn / spec.dt + spec.heading_noise * rng.standard_normal()
        speed[i] = max(0.0, length / spec.dt * (1.0 + spec.velocity_noise * rng.standard_normal()))
    scene = np.arange(n)
    closed = np.allclose(spec.waypoints[0], spec.waypoints[-1])
    if spec.revisit_cue and closed:
        scene[-1] = 0
    return TrajectoryWorld(times, omega, speed, scene, poses)


def write_trace(world: TrajectoryWorld, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "omega", "v", "scene"])
        for t, om, v, s in zip(world.times, world.omega, world.speed, world.scene):
            w.writerow([repr(float(t)), repr(float(om)), repr(float(v)), int(s)])


def write_planar_ground_truth(poses: np.ndarray, path) -> None:
    from .io import write_poses

    write_poses([planar_pose_to_transform(*p) for p in poses], path)


def synthesize_photometric(spec: PhotometricSpec, out_dir, seed: int = 0) -> list[RigidTransform3]:
    """Write a rendered stereo sequence in the KITTI directory layout."""
    from .io import write_poses, write_raster

    out = Path(out_dir)
    (out / "image_0").mkdir(parents=True, exist_ok=True)
    (out / "image_1").mkdir(parents=True, exist_ok=True)
    tex = PlaneTexture(seed)
    k = spec.intrinsics()
    poses = spec.poses()
    times = []
    for i, pose in enumerate(poses):
        gain = spec.brightness_gain * i
        offset = spec.brightness_offset * i
        left, right = render_stereo(tex, k, pose, spec.plane_depth, gain, offset)
        write_raster(left, out / "image_0" / f"{i:06d}.png")
        write_raster(right, out / "image_1" / f"{i:06d}.png")
        times.append(i / spec.frame_rate)
    (out / "times.txt").write_text("".join(f"{t:.6e}\n" for t in times))
    write_poses(poses, out / "poses.txt")
    (out / "calib.txt").write_text(
        f"fx {k.fx!r}\nfy {k.fy!r}\ncx {k.cx!r}\ncy {k.cy!r}\nbaseline {k.baseline!r}\n"
    )
    return poses


def synthesize_world(spec, seed: int = 0, out_dir=None):
    """Dispatch on the type of ``spec``; writes files when ``out_dir`` is given."""
    if isinstance(spec, PhotometricSpec):
        if out_dir is None:
            raise ValueError("photometric worlds are written to disk")
        return synthesize_photometric(spec, out_dir, seed)
    world = synthesize_trajectory(spec, seed)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trace(world, out / "trace.csv")
        write_planar_ground_truth(world.poses, out / "poses.txt")
        (out / "times.txt").write_text("".join(f"{float(t)!r}\n" for t in world.times))
    return world
