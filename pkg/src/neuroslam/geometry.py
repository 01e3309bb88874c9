"""Rigid transforms, pinhole projection and planar velocity extraction.

Camera frames follow the usual pinhole layout: x right, y down, z forward.
Planar quantities live in the ground plane spanned by the camera z axis
(map X) and the camera x axis (map Y); with that choice a positive rotational
velocity is a counter-clockwise heading change in map coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class InvalidDepthError(ValueError):
    pass


class InvalidIntervalError(ValueError):
    pass


def wrap_pi(angle):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    out = np.mod(np.asarray(angle, dtype=float) + math.pi, TWO_PI) - math.pi
    out = np.where(out >= math.pi, out - TWO_PI, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def wrap_2pi(angle):
    """Wrap an angle (scalar or array) into [0, 2*pi)."""
    out = np.mod(np.asarray(angle, dtype=float), TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def so3_exp(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    W = skew(w)
    if theta < 1e-10:
        return np.eye(3) + W + 0.5 * W @ W
    a = math.sin(theta) / theta
    b = (1.0 - math.cos(theta)) / theta**2
    return np.eye(3) + a * W + b * W @ W


def so3_log(R) -> np.ndarray:
    cos_t = min(1.0, max(-1.0, (np.trace(R) - 1.0) / 2.0))
    theta = math.acos(cos_t)
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-10:
        return 0.5 * v
    if math.pi - theta < 1e-6:
        # near pi: recover the axis from the symmetric part
        M = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(M), 0.0, None))
        k = int(np.argmax(axis))
        axis[k] = math.sqrt(M[k, k])
        for i in range(3):
            if i != k:
                axis[i] = M[k, i] / axis[k]
        axis /= np.linalg.norm(axis)
        if np.dot(axis, v) < 0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * math.sin(theta)) * v


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class RigidTransform3:
    """SE(3) element mapping points x -> rotation @ x + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform3:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> RigidTransform3:
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def exp(cls, xi) -> RigidTransform3:
        """Exponential map of a twist ``xi = (v, w)`` (translation first)."""
        xi = np.asarray(xi, dtype=float)
        v, w = xi[:3], xi[3:]
        theta = float(np.linalg.norm(w))
        W = skew(w)
        if theta < 1e-10:
            V = np.eye(3) + 0.5 * W + W @ W / 6.0
        else:
            V = (
                np.eye(3)
                + (1.0 - math.cos(theta)) / theta**2 * W
                + (theta - math.sin(theta)) / theta**3 * W @ W
            )
        return cls(so3_exp(w), V @ v)

    def log(self) -> np.ndarray:
        w = so3_log(self.rotation)
        theta = float(np.linalg.norm(w))
        W = skew(w)
        if theta < 1e-10:
            V_inv = np.eye(3) - 0.5 * W + W @ W / 12.0
        else:
            half = theta / 2.0
            coef = (1.0 - half * math.cos(half) / math.sin(half)) / theta**2
            V_inv = np.eye(3) - 0.5 * W + coef * W @ W
        return np.concatenate([V_inv @ self.translation, w])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def matrix3x4(self) -> np.ndarray:
        return self.matrix()[:3, :]

    def inverse(self) -> RigidTransform3:
        Rt = self.rotation.T
        return RigidTransform3(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        """Transform a single 3-vector or an (N, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def __matmul__(self, other: RigidTransform3) -> RigidTransform3:
        return RigidTransform3(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def is_valid(self, tol: float = 1e-9) -> bool:
        R = self.rotation
        return bool(
            np.allclose(R.T @ R, np.eye(3), atol=tol)
            and abs(np.linalg.det(R) - 1.0) <= tol
        )

    def reorthonormalized(self) -> RigidTransform3:
        U, _, Vt = np.linalg.svd(self.rotation)
        R = U @ Vt
        if np.linalg.det(R) < 0:
            U[:, -1] *= -1
            R = U @ Vt
        return RigidTransform3(R, self.translation)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0 or self.baseline <= 0:
            raise ValueError("focal lengths and baseline must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, level: int) -> CameraIntrinsics:
        """Intrinsics of pyramid ``level`` built by 2x2 averaging."""
        s = 0.5**level
        w = max(1, self.width >> level)
        h = max(1, self.height >> level)
        cx = (self.cx + 0.5) * s - 0.5
        cy = (self.cy + 0.5) * s - 0.5
        return CameraIntrinsics(
            self.fx * s, self.fy * s, min(max(cx, 0.0), w - 1e-9),
            min(max(cy, 0.0), h - 1e-9), self.baseline, w, h,
        )

    @property
    def horizontal_fov(self) -> float:
        return 2.0 * math.atan(self.width / (2.0 * self.fx))


@dataclass(frozen=True)
class PlanarVelocity:
    rotational: float
    translational: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidIntervalError(f"dt must be positive, got {self.dt}")
        if self.translational < 0:
            raise ValueError("translational speed must be non-negative")


def project(k: CameraIntrinsics, p) -> np.ndarray | None:
    """Pinhole projection; returns None for points at or behind the camera."""
    p = np.asarray(p, dtype=float)
    if not p[2] > 0:
        return None
    return np.array([k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy])


def back_project(k: CameraIntrinsics, px, inv_depth: float) -> np.ndarray:
    if not inv_depth > 0:
        raise InvalidDepthError(f"inverse depth must be positive, got {inv_depth}")
    u, v = float(px[0]), float(px[1])
    z = 1.0 / inv_depth
    return np.array([(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z])


def relative_transform(t_i: RigidTransform3, t_j: RigidTransform3) -> RigidTransform3:
    """T_ji = T_j^-1 T_i: maps points expressed in frame i into frame j."""
    return t_j.inverse() @ t_i


def velocity_from_relative(t_ji: RigidTransform3, dt: float) -> PlanarVelocity:
    if not dt > 0:
        raise InvalidIntervalError(f"dt must be positive, got {dt}")
    R, t = t_ji.rotation, t_ji.translation
    omega = math.atan2(R[2, 0], math.hypot(R[2, 1], R[2, 2])) / dt
    v = math.hypot(t[0], t[2]) / dt
    return PlanarVelocity(omega, v, dt)


def planar_pose_to_transform(x: float, y: float, theta: float) -> RigidTransform3:
    """Camera pose for a planar pose (map X = camera z, map Y = camera x)."""
    return RigidTransform3(rot_y(theta), np.array([y, 0.0, x]))


def transform_to_planar_pose(t: RigidTransform3) -> tuple[float, float, float]:
    R = t.rotation
    theta = math.atan2(R[0, 2], R[2, 2])
    return float(t.translation[2]), float(t.translation[0]), wrap_pi(theta)
