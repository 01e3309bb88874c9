"""Keyframe window: data types, keyframe decisions, windowed optimization and marginalization."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..geometry import (CameraIntrinsics, InvalidIntervalError, PlanarVelocity, RigidTransform3,
                        relative_transform, velocity_from_relative)
from .image import as_float_image, build_pyramid, inside
from .photometric import (PATTERN, ActivePoint, HostSamples, LevelImage, huber_irls, huber_norm,
                          level_pixels, pair_residuals, sample_host, stereo_transform)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VOConfig:
    pyramid_levels: int = 4
    huber_gamma: float = 9.0
    gradient_c: float = 25.0
    coupling: float = 1.0  # weight of the static-stereo term
    max_keyframes: int = 7
    g_const: float = 7.0
    block_rows: int = 8
    block_cols: int = 8
    cell: int | None = 6
    stereo_search_range: int = 64
    flow_threshold: float = 64.0  # mean squared point displacement, px^2
    brightness_threshold: float = 0.2
    max_iterations: int = 50
    convergence_tol: float = 1e-6
    lost_after: int = 5
    lost_energy: float = 81.0  # mean robust energy per term above which tracking is lost
    affine_prior_a: float = 1e3  # tracking prior weights holding a, b near their initial guess
    affine_prior_b: float = 1e-2
    joint_iterations: int = 4
    max_damping_retries: int = 5

    def __post_init__(self):
        if self.pyramid_levels < 1 or self.max_keyframes < 3:
            raise ValueError("need >= 1 pyramid level and a window of >= 3 keyframes")
        if min(self.huber_gamma, self.gradient_c) <= 0 or self.coupling < 0:
            raise ValueError("huber_gamma and gradient_c must be positive, coupling non-negative")


@dataclass
class FrameData:
    left: np.ndarray
    right: np.ndarray
    timestamp: float
    affine_a: float = 0.0
    affine_b: float = 0.0

    def __post_init__(self):
        self.left = as_float_image(self.left)
        self.right = as_float_image(self.right)
        if self.left.shape != self.right.shape:
            raise ValueError(f"left {self.left.shape} and right {self.right.shape} differ")


@dataclass
class PointSet:
    """Host pixels with inverse depths (and variances for immature points)."""

    pixels: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    idepth: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ivar: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.idepth)

    def subset(self, mask) -> PointSet:
        return PointSet(self.pixels[mask], self.idepth[mask], self.ivar[mask])

    def extend(self, other: PointSet) -> PointSet:
        return PointSet(np.concatenate([self.pixels, other.pixels]),
                        np.concatenate([self.idepth, other.idepth]),
                        np.concatenate([self.ivar, other.ivar]))


class Keyframe:
    def __init__(self, kf_id: int, frame: FrameData, pose: RigidTransform3, levels: int,
                 affine: tuple[float, float] | None = None):
        self.id = kf_id
        self.frame = frame
        self.pose = pose
        self.affine = tuple(affine) if affine is not None else (frame.affine_a, frame.affine_b)
        self.left = [LevelImage.from_image(im) for im in build_pyramid(frame.left, levels)]
        self.right = [LevelImage.from_image(im) for im in build_pyramid(frame.right, levels)]
        self.points = PointSet()
        self.candidates = PointSet()
        self._cache: dict = {}

    @property
    def timestamp(self) -> float:
        return self.frame.timestamp

    def set_points(self, points: PointSet) -> None:
        self.points = points
        self._cache.clear()

    def host_samples(self, level: int, k: CameraIntrinsics, c: float) -> HostSamples:
        key = (level, len(self.points))
        if key not in self._cache:
            px = level_pixels(self.points.pixels, level)
            self._cache[key] = sample_host(self.left[level], px, k.scaled(level), c)
        return self._cache[key]

    def active_points(self) -> list[ActivePoint]:
        out = []
        for px, d in zip(self.points.pixels, self.points.idepth):
            out.append(ActivePoint(self.id, (float(px[0]), float(px[1])), float(d)))
        return out


@dataclass
class KeyframeWindow:
    k: CameraIntrinsics
    config: VOConfig = field(default_factory=VOConfig)
    keyframes: list[Keyframe] = field(default_factory=list)

    @property
    def coupling(self) -> float:
        return self.config.coupling

    @property
    def huber_gamma(self) -> float:
        return self.config.huber_gamma

    @property
    def gradient_c(self) -> float:
        return self.config.gradient_c

    def __len__(self) -> int:
        return len(self.keyframes)

    def latest(self) -> Keyframe:
        return self.keyframes[-1]

    def n_points(self) -> int:
        return sum(len(kf.points) for kf in self.keyframes)


@dataclass
class TrackedFrame:
    frame: FrameData
    pose: RigidTransform3
    affine: tuple[float, float]


def mean_squared_flow(window: KeyframeWindow, tracked: TrackedFrame) -> float:
    """Mean squared displacement of the latest keyframe's points and candidates
    when reprojected into the tracked frame."""
    ref = window.latest()
    pts = ref.points.extend(ref.candidates)
    if len(pts) == 0:
        return 0.0
    k = window.k
    t_ji = relative_transform(ref.pose, tracked.pose)
    px = pts.pixels
    rays = np.stack([(px[:, 0] - k.cx) / k.fx, (px[:, 1] - k.cy) / k.fy, np.ones(len(px))], -1)
    X = rays / pts.idepth[:, None]
    Xp = t_ji.apply(X)
    ok = Xp[:, 2] > 1e-9
    if not ok.any():
        return float("inf")
    u = k.fx * Xp[ok, 0] / Xp[ok, 2] + k.cx
    v = k.fy * Xp[ok, 1] / Xp[ok, 2] + k.cy
    return float(np.mean((u - px[ok, 0]) ** 2 + (v - px[ok, 1]) ** 2))


def needs_keyframe(window: KeyframeWindow, tracked: TrackedFrame, flow_threshold: float,
                   brightness_threshold: float) -> bool:
    """True on large mean squared flow or a large exposure change.

    The exposure change is the tracked ``a`` relative to the latest keyframe.
    """
    if len(window) == 0:
        return True
    da = abs(tracked.affine[0] - window.latest().affine[0])
    return mean_squared_flow(window, tracked) > flow_threshold or da > brightness_threshold


def emit_velocity(window: KeyframeWindow) -> PlanarVelocity:
    """Planar velocity between the two latest keyframes."""
    if len(window) < 2:
        raise ValueError("need two keyframes")
    a, b = window.keyframes[-2], window.keyframes[-1]
    dt = b.timestamp - a.timestamp
    if not dt > 0:
        raise InvalidIntervalError(f"non-positive keyframe interval {dt}")
    return velocity_from_relative(relative_transform(a.pose, b.pose), dt)


# -- joint optimization -------------------------------------------------------

@dataclass
class _Linearization:
    energy: float
    H_ff: np.ndarray | None = None
    b_f: np.ndarray | None = None
    H_fd: np.ndarray | None = None
    H_dd: np.ndarray | None = None
    b_d: np.ndarray | None = None


def _window_pairs(window: KeyframeWindow):
    for i, host in enumerate(window.keyframes):
        if len(host.points) == 0:
            continue
        for j, target in enumerate(window.keyframes):
            if i != j:
                yield i, host, j, target


def _linearize(window: KeyframeWindow, poses, affines, idepths, jacobians: bool) -> _Linearization:
    cfg = window.config
    k = window.k
    nf = len(window.keyframes)
    offsets = np.cumsum([0] + [len(kf.points) for kf in window.keyframes])
    nd = int(offsets[-1])
    energy = 0.0
    if jacobians:
        H_ff = np.zeros((8 * nf, 8 * nf))
        b_f = np.zeros(8 * nf)
        H_fd = np.zeros((8 * nf, nd))
        H_dd = np.zeros(nd)
        b_d = np.zeros(nd)
    stereo = stereo_transform(k)
    for i, host in enumerate(window.keyframes):
        if len(host.points) == 0:
            continue
        hs = host.host_samples(0, k, cfg.gradient_c)
        sl = slice(offsets[i], offsets[i + 1])
        d = idepths[sl]
        terms = [(j, relative_transform(poses[i], poses[j]), window.keyframes[j].left[0],
                  affines[j], 1.0) for j in range(nf) if j != i]
        if cfg.coupling > 0:
            terms.append((None, stereo, host.right[0], affines[i], cfg.coupling))
        for j, t_ji, target, aff_j, scale in terms:
            lin = pair_residuals(hs, d, target, t_ji, k, affines[i], aff_j, jacobians=jacobians)
            r = lin.r
            w = scale * lin.omega
            energy += float(np.sum(w * huber_norm(r, cfg.huber_gamma)))
            if not jacobians:
                continue
            wr = w * huber_irls(r, cfg.huber_gamma)
            Jd = lin.J_idepth
            H_dd[sl] += np.sum(wr * Jd * Jd, axis=1)
            b_d[sl] += np.sum(wr * Jd * r, axis=1)
            if j is None:
                continue  # static term: rig is rigid and exposures tied
            Jt, Jh = lin.J_target, lin.J_host
            fi, fj = slice(8 * i, 8 * i + 8), slice(8 * j, 8 * j + 8)
            H_ff[fi, fi] += np.einsum("np,npa,npb->ab", wr, Jh, Jh)
            H_ff[fj, fj] += np.einsum("np,npa,npb->ab", wr, Jt, Jt)
            cross = np.einsum("np,npa,npb->ab", wr, Jh, Jt)
            H_ff[fi, fj] += cross
            H_ff[fj, fi] += cross.T
            b_f[fi] += np.einsum("np,npa,np->a", wr, Jh, r)
            b_f[fj] += np.einsum("np,npa,np->a", wr, Jt, r)
            H_fd[fi, sl] += np.einsum("np,npa,np->an", wr, Jh, Jd)
            H_fd[fj, sl] += np.einsum("np,npa,np->an", wr, Jt, Jd)
    if not jacobians:
        return _Linearization(energy)
    return _Linearization(energy, H_ff, b_f, H_fd, H_dd, b_d)


def window_energy(window: KeyframeWindow) -> float:
    poses, affines, idepths = _state(window)
    return _linearize(window, poses, affines, idepths, jacobians=False).energy


def _state(window: KeyframeWindow):
    poses = [kf.pose for kf in window.keyframes]
    affines = [tuple(kf.affine) for kf in window.keyframes]
    idepths = np.concatenate([kf.points.idepth for kf in window.keyframes]) \
        if window.keyframes else np.zeros(0)
    return poses, affines, idepths


def _apply(poses, affines, idepths, delta_f, delta_d, max_rel_step=0.05):
    new_poses, new_aff = [], []
    for n, (p, a) in enumerate(zip(poses, affines)):
        dx = delta_f[8 * n: 8 * n + 8]
        new_poses.append((p @ RigidTransform3.exp(dx[:6])).reorthonormalized())
        new_aff.append((a[0] + dx[6], a[1] + dx[7]))
    new_d = idepths + np.clip(delta_d, -max_rel_step * idepths, max_rel_step * idepths)
    return new_poses, new_aff, new_d


@dataclass
class JointResult:
    iterations: int
    accepted: int
    initial_energy: float
    final_energy: float


def joint_optimize(window: KeyframeWindow, iterations: int = 4,
                   damping: float = 1e-4) -> JointResult:
    """Damped Gauss-Newton over keyframe poses, affine parameters and inverse depths.

    The first keyframe is the gauge. Point depths are eliminated with the Schur
    complement. Each inverse depth moves by at most 5% per step, which keeps
    depths from absorbing pose error while poses are still far off. Steps are
    accepted only when the total energy decreases; a rejected or singular step
    retries with ten times the damping.
    """
    if len(window) < 2:
        raise ValueError("joint optimization needs at least two keyframes")
    cfg = window.config
    poses, affines, idepths = _state(window)
    nf = len(poses)
    lin = _linearize(window, poses, affines, idepths, jacobians=True)
    e0 = lin.energy
    accepted = 0
    it = 0
    lam = damping
    for it in range(1, iterations + 1):
        free = slice(8, 8 * nf)
        H_ff = lin.H_ff[free, free]
        b_f = lin.b_f[free]
        H_fd = lin.H_fd[free]
        step_taken = False
        for _ in range(cfg.max_damping_retries + 1):
            Hdd = lin.H_dd * (1.0 + lam) + 1e-12
            Hff = H_ff + lam * np.diag(np.diag(H_ff)) + 1e-12 * np.eye(len(b_f))
            inv_dd = 1.0 / Hdd
            S = Hff - (H_fd * inv_dd) @ H_fd.T
            rhs = -(b_f - H_fd @ (inv_dd * lin.b_d))
            try:
                dfree = linalg.solve(S, rhs, assume_a="sym")
            except (linalg.LinAlgError, ValueError):
                lam *= 10.0
                continue
            if not np.all(np.isfinite(dfree)):
                lam *= 10.0
                continue
            dd = -inv_dd * (lin.b_d + H_fd.T @ dfree)
            df = np.concatenate([np.zeros(8), dfree])
            cand = _apply(poses, affines, idepths, df, dd)
            e_new = _linearize(window, *cand, jacobians=False).energy
            if e_new < lin.energy:
                poses, affines, idepths = cand
                lam = max(lam / 10.0, 1e-8)
                step_taken = True
                break
            lam *= 10.0
        if not step_taken:
            break
        accepted += 1
        prev = lin.energy
        lin = _linearize(window, poses, affines, idepths, jacobians=True)
        if prev - lin.energy <= cfg.convergence_tol * max(prev, 1e-300):
            break
    _store(window, poses, affines, idepths)
    return JointResult(it, accepted, e0, lin.energy)


def _store(window: KeyframeWindow, poses, affines, idepths) -> None:
    off = 0
    for kf, p, a in zip(window.keyframes, poses, affines):
        n = len(kf.points)
        kf.pose = p
        kf.affine = (float(a[0]), float(a[1]))
        kf.points.idepth = np.array(idepths[off: off + n], dtype=float)
        off += n


# -- marginalization ------------------------------------------------------------

def _distance_score(window: KeyframeWindow, i: int) -> float:
    latest = window.keyframes[-1]
    kf = window.keyframes[i]
    d_latest = np.linalg.norm(kf.pose.translation - latest.pose.translation)
    s = 0.0
    for j, other in enumerate(window.keyframes[:-1]):
        if j != i:
            s += 1.0 / (np.linalg.norm(kf.pose.translation - other.pose.translation) + 1e-6)
    return float(np.sqrt(d_latest) * s)


def _observed(window: KeyframeWindow, host: Keyframe, target: Keyframe) -> np.ndarray:
    k = window.k
    if len(host.points) == 0:
        return np.zeros(0, dtype=bool)
    px = host.points.pixels
    rays = np.stack([(px[:, 0] - k.cx) / k.fx, (px[:, 1] - k.cy) / k.fy, np.ones(len(px))], -1)
    Xp = relative_transform(host.pose, target.pose).apply(rays / host.points.idepth[:, None])
    z = Xp[:, 2]
    zs = np.where(z > 1e-9, z, 1.0)
    u = k.fx * Xp[:, 0] / zs + k.cx
    v = k.fy * Xp[:, 1] / zs + k.cy
    return (z > 1e-9) & inside((k.height, k.width), u, v, margin=2.0)


def marginalize(window: KeyframeWindow) -> Keyframe | None:
    """Drop one keyframe once the window exceeds its size; returns it.

    The two newest keyframes are protected; among the rest the one with the
    largest distance score is dropped together with its points. Points no
    longer visible in either of the two newest keyframes are discarded too.
    """
    if len(window) <= window.config.max_keyframes:
        return None
    scores = [_distance_score(window, i) for i in range(len(window) - 2)]
    drop = int(np.argmax(scores))
    removed = window.keyframes.pop(drop)
    newest = window.keyframes[-2:]
    for kf in window.keyframes:
        if kf in newest:
            continue
        keep = np.zeros(len(kf.points), dtype=bool)
        for target in newest:
            keep |= _observed(window, kf, target)
        if not keep.all():
            kf.set_points(kf.points.subset(keep))
    return removed
