"""Coarse-to-fine direct image alignment of a new frame against the keyframe window."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import RigidTransform3, relative_transform
from .image import build_pyramid
from .photometric import LevelImage, huber_irls, huber_norm, pair_residuals
from .window import FrameData, KeyframeWindow


@dataclass
class TrackResult:
    pose: RigidTransform3
    affine: tuple[float, float]
    converged: bool
    lost: bool
    energy: float
    iterations: int


def _frame_pyramid(frame: FrameData, levels: int) -> list[LevelImage]:
    return [LevelImage.from_image(im) for im in build_pyramid(frame.left, levels)]


def _evaluate(window, target: LevelImage, level: int, pose, affine, prior, jacobians: bool):
    """Mean energy per valid term plus the affine prior, with its normal equations."""
    cfg = window.config
    k = window.k.scaled(level)
    energy = 0.0
    n_valid = 0
    H = np.zeros((8, 8))
    g = np.zeros(8)
    for kf in window.keyframes:
        if len(kf.points) == 0:
            continue
        hs = kf.host_samples(level, window.k, cfg.gradient_c)
        t_ji = relative_transform(kf.pose, pose)
        lin = pair_residuals(hs, kf.points.idepth, target, t_ji, k, kf.affine, affine,
                             jacobians=jacobians)
        energy += float(np.sum(lin.omega * huber_norm(lin.r, cfg.huber_gamma)))
        n_valid += int(lin.valid.sum())
        if jacobians:
            w = lin.omega * huber_irls(lin.r, cfg.huber_gamma)
            J = lin.J_target
            H += np.einsum("np,npa,npb->ab", w, J, J)
            g += np.einsum("np,npa,np->a", w, J, lin.r)
    if n_valid == 0:
        return float("inf"), 0, H, g
    da = np.array([affine[0] - prior[0], affine[1] - prior[1]])
    wa = np.array([cfg.affine_prior_a, cfg.affine_prior_b])
    energy = energy / n_valid + 0.5 * float(np.sum(wa * da * da))
    H /= n_valid
    g /= n_valid
    H[6:, 6:] += np.diag(wa)
    g[6:] += wa * da
    return energy, n_valid, H, g


def track_frame(window: KeyframeWindow, new_frame: FrameData,
                init_pose: RigidTransform3 | None = None,
                init_affine: tuple[float, float] | None = None) -> TrackResult:
    """Estimate the pose and affine brightness of ``new_frame``; depths stay fixed.

    Levenberg-damped Gauss-Newton on each pyramid level from coarse to fine.
    The energy is the mean robust term over valid residuals, so points leaving
    the image neither reward nor penalise a step, plus weak priors holding
    ``a`` and ``b`` near their initial values. A level ends when the relative
    energy decrease drops below the
    convergence tolerance, after the iteration cap, or after ``lost_after``
    consecutive rejected damped steps. Tracking is lost when such a run of
    rejections happens before any progress on a level, or when the final
    mean energy exceeds ``lost_energy``.
    """
    if len(window) == 0 or window.n_points() == 0:
        raise ValueError("window has no active points to track against")
    cfg = window.config
    pose = init_pose if init_pose is not None else window.latest().pose
    affine = tuple(init_affine) if init_affine is not None else tuple(window.latest().affine)
    prior = affine
    pyr = _frame_pyramid(new_frame, cfg.pyramid_levels)
    converged_all = True
    total_it = 0
    energy = float("nan")
    for level in reversed(range(cfg.pyramid_levels)):
        target = pyr[level]
        energy, n_valid, H, g = _evaluate(window, target, level, pose, affine, prior, True)
        if n_valid == 0:
            return TrackResult(pose, affine, False, True, float("inf"), total_it)
        lam = 1e-3
        start_energy = energy
        rejected = 0
        converged = False
        for _ in range(cfg.max_iterations):
            total_it += 1
            A = H + lam * np.diag(np.diag(H)) + 1e-9 * np.eye(8)
            try:
                delta = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                new_pose = (pose @ RigidTransform3.exp(delta[:6])).reorthonormalized()
                new_aff = (affine[0] + delta[6], affine[1] + delta[7])
                e_new, nv, H_new, g_new = _evaluate(window, target, level, new_pose, new_aff, prior,
                                                    True)
                rel = (energy - e_new) / max(energy, 1e-300)
                if nv > 0 and e_new <= energy:
                    pose, affine, energy, H, g = new_pose, new_aff, e_new, H_new, g_new
                    lam = max(lam * 0.5, 1e-7)
                    rejected = 0
                    if rel < cfg.convergence_tol:
                        converged = True
                        break
                    continue
                if -rel < cfg.convergence_tol:
                    # the rejected step is within numerical noise of the optimum
                    converged = True
                    break
            rejected += 1
            lam *= 10.0
            if rejected >= cfg.lost_after:
                if energy >= start_energy:
                    return TrackResult(pose, affine, False, True, energy, total_it)
                break  # stalled after making progress: hand over to the next level
        converged_all &= converged
    if not energy <= cfg.lost_energy:
        return TrackResult(pose, affine, False, True, energy, total_it)
    return TrackResult(pose, (float(affine[0]), float(affine[1])), converged_all, False,
                       energy, total_it)
