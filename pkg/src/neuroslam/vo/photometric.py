"""Photometric residuals of direct image alignment and their analytic Jacobians.

Poses are camera-to-world transforms. Pose increments are right-multiplied
twists ``xi = (v, w)``: ``T <- T @ exp(xi)``. For a host/target pair the
point map is ``X' = T_ji X`` with ``T_ji = T_j^-1 T_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import CameraIntrinsics, RigidTransform3
from .image import bilinear, central_gradient, inside

# DSO's eight-pixel residual pattern as (du, dv) offsets
PATTERN = np.array(
    [[0, -2], [-1, -1], [1, -1], [-2, 0], [0, 0], [2, 0], [-1, 1], [0, 2]], dtype=float
)
PATTERN_RADIUS = 2


@dataclass(frozen=True)
class ActivePoint:
    host_keyframe: int
    pixel: tuple[float, float]
    inverse_depth: float
    gradient_weight: np.ndarray = field(default_factory=lambda: np.ones(len(PATTERN)))
    pattern: np.ndarray = field(default_factory=lambda: PATTERN.copy())

    def __post_init__(self):
        if not self.inverse_depth > 0:
            raise ValueError("inverse depth must be positive")


@dataclass
class PhotometricResidual:
    residuals: np.ndarray
    huber_weights: np.ndarray
    terms: np.ndarray
    valid: np.ndarray

    @property
    def energy(self) -> float:
        return float(np.sum(self.terms[self.valid]))


def huber_norm(r, gamma: float) -> np.ndarray:
    a = np.abs(r)
    return np.where(a <= gamma, 0.5 * a * a, gamma * (a - 0.5 * gamma))


def huber_irls(r, gamma: float) -> np.ndarray:
    a = np.abs(r)
    return np.where(a <= gamma, 1.0, gamma / np.maximum(a, 1e-300))


def gradient_weight(image, pixel, c: float) -> float:
    """c^2 / (c^2 + |grad I|^2) at an interior pixel (central differences)."""
    img = np.asarray(image, dtype=float)
    u, v = int(round(pixel[0])), int(round(pixel[1]))
    gx = 0.5 * (img[v, u + 1] - img[v, u - 1])
    gy = 0.5 * (img[v + 1, u] - img[v - 1, u])
    return c * c / (c * c + gx * gx + gy * gy)


@dataclass
class LevelImage:
    """One pyramid level of a raster with cached gradients."""

    image: np.ndarray
    gx: np.ndarray
    gy: np.ndarray

    @classmethod
    def from_image(cls, img: np.ndarray) -> LevelImage:
        gx, gy = central_gradient(img)
        return cls(img, gx, gy)

    @property
    def shape(self):
        return self.image.shape


def level_pixels(px: np.ndarray, level: int) -> np.ndarray:
    s = 0.5**level
    return (np.asarray(px, dtype=float) + 0.5) * s - 0.5


@dataclass
class HostSamples:
    """Host-side quantities of a point set at one pyramid level."""

    pixels: np.ndarray  # (N, 8, 2) pattern pixel coordinates
    rays: np.ndarray  # (N, 8, 3) un-normalised rays K^-1 [p~, 1]
    intensity: np.ndarray  # (N, 8)
    weight: np.ndarray  # (N, 8) gradient down-weighting
    valid: np.ndarray  # (N, 8)


def sample_host(host: LevelImage, px_level: np.ndarray, k: CameraIntrinsics,
                c: float) -> HostSamples:
    pu = px_level[:, None, 0] + PATTERN[None, :, 0]
    pv = px_level[:, None, 1] + PATTERN[None, :, 1]
    valid = inside(host.shape, pu, pv, margin=0.0)
    cu = np.clip(pu, 0, host.shape[1] - 1)
    cv = np.clip(pv, 0, host.shape[0] - 1)
    intensity = bilinear(host.image, cu, cv)
    gx = bilinear(host.gx, cu, cv)
    gy = bilinear(host.gy, cu, cv)
    weight = c * c / (c * c + gx * gx + gy * gy)
    rays = np.stack([(pu - k.cx) / k.fx, (pv - k.cy) / k.fy, np.ones_like(pu)], axis=-1)
    return HostSamples(np.stack([pu, pv], axis=-1), rays, intensity, weight, valid)


@dataclass
class PairLinearization:
    r: np.ndarray  # (N, 8)
    valid: np.ndarray  # (N, 8)
    omega: np.ndarray  # (N, 8)
    J_target: np.ndarray | None = None  # (N, 8, 8): xi_j (6), a_j, b_j
    J_host: np.ndarray | None = None  # (N, 8, 8): xi_i (6), a_i, b_i
    J_idepth: np.ndarray | None = None  # (N, 8)
    proj: np.ndarray | None = None  # (N, 8, 2)


def pair_residuals(hs: HostSamples, idepth: np.ndarray, target: LevelImage,
                   t_ji: RigidTransform3, k: CameraIntrinsics,
                   host_affine: tuple[float, float], target_affine: tuple[float, float],
                   jacobians: bool = False) -> PairLinearization:
    """Residuals ``I_j[p'] - b_j - e^{a_j - a_i} (I_i[p] - b_i)`` for every pattern pixel."""
    R, t = t_ji.rotation, t_ji.translation
    d = np.asarray(idepth, dtype=float)[:, None, None]
    X = hs.rays / d
    Xp = X @ R.T + t
    z = Xp[..., 2]
    ok = hs.valid & (z > 1e-9)
    zs = np.where(ok, z, 1.0)
    # pixel = host pixel + displacement, via the depth-scaled point R ray + d t;
    # equal to the plain projection but exact for the identity transform
    Q = hs.rays @ R.T + d * t
    qz = np.where(ok, Q[..., 2], 1.0)
    u = hs.pixels[..., 0] + k.fx * (Q[..., 0] / qz - hs.rays[..., 0])
    v = hs.pixels[..., 1] + k.fy * (Q[..., 1] / qz - hs.rays[..., 1])
    ok &= inside(target.shape, u, v, margin=0.0)
    uc = np.clip(u, 0, target.shape[1] - 1)
    vc = np.clip(v, 0, target.shape[0] - 1)
    a_i, b_i = host_affine
    a_j, b_j = target_affine
    e = np.exp(a_j - a_i)
    centered = hs.intensity - b_i
    if jacobians:
        Ij, gu, gv = bilinear(target.image, uc, vc, with_gradient=True)
    else:
        Ij = bilinear(target.image, uc, vc)
    r = Ij - b_j - e * centered
    r = np.where(ok, r, 0.0)
    out = PairLinearization(r, ok, np.where(ok, hs.weight, 0.0), proj=np.stack([u, v], -1))
    if not jacobians:
        return out

    inv_z = 1.0 / zs
    # d(residual)/dX' through projection and image gradient
    JX = np.empty(Xp.shape)
    JX[..., 0] = gu * k.fx * inv_z
    JX[..., 1] = gv * k.fy * inv_z
    JX[..., 2] = -(gu * k.fx * Xp[..., 0] + gv * k.fy * Xp[..., 1]) * inv_z * inv_z

    n = len(d)
    Jt = np.zeros((n, len(PATTERN), 8))
    Jt[..., 0:3] = -JX
    Jt[..., 3:6] = np.cross(JX, Xp)
    Jt[..., 6] = -e * centered
    Jt[..., 7] = -1.0

    B = JX @ R
    Jh = np.zeros((n, len(PATTERN), 8))
    Jh[..., 0:3] = B
    Jh[..., 3:6] = -np.cross(B, X)
    Jh[..., 6] = e * centered
    Jh[..., 7] = e

    dXdd = -(Xp - t) / d
    Jd = np.sum(JX * dXdd, axis=-1)

    mask = ok[..., None]
    out.J_target = np.where(mask, Jt, 0.0)
    out.J_host = np.where(mask, Jh, 0.0)
    out.J_idepth = np.where(ok, Jd, 0.0)
    return out


def stereo_transform(k: CameraIntrinsics) -> RigidTransform3:
    """Left-camera to right-camera transform of a rectified rig."""
    return RigidTransform3(np.eye(3), np.array([-k.baseline, 0.0, 0.0]))


def photometric_residual(host: np.ndarray, target: np.ndarray, point: ActivePoint,
                         t_ji: RigidTransform3, k: CameraIntrinsics,
                         affine=((0.0, 0.0), (0.0, 0.0)), gamma: float = 9.0,
                         c: float = 25.0) -> PhotometricResidual:
    """Residual terms of one point's pattern; ``affine = ((a_i, b_i), (a_j, b_j))``.

    Raises ValueError when every pattern pixel projects outside the target.
    """
    host_l = LevelImage.from_image(np.asarray(host, dtype=float))
    target_l = LevelImage.from_image(np.asarray(target, dtype=float))
    hs = sample_host(host_l, np.array([point.pixel], dtype=float), k, c)
    lin = pair_residuals(hs, np.array([point.inverse_depth]), target_l, t_ji, k,
                         affine[0], affine[1])
    valid = lin.valid[0]
    if not valid.any():
        raise ValueError("point projects outside the target image")
    r = lin.r[0]
    terms = np.where(valid, lin.omega[0] * huber_norm(r, gamma), 0.0)
    return PhotometricResidual(r, huber_irls(r, gamma), terms, valid)
