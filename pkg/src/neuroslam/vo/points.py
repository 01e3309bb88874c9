"""Candidate point selection, static stereo depth and epipolar depth refinement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..geometry import CameraIntrinsics, RigidTransform3
from .image import bilinear, gradient_magnitude, inside
from .photometric import PATTERN, PATTERN_RADIUS


def _edges(n: int, parts: int) -> np.ndarray:
    return (np.arange(parts + 1) * n) // parts


def select_candidate_points(image, block_rows: int, block_cols: int, cell: int | None = None,
                            g_const: float = 7.0, margin: int = PATTERN_RADIUS + 2) -> np.ndarray:
    """Pick high-gradient pixels against a per-block adaptive threshold.

    The image is split into ``block_rows x block_cols`` blocks; each block's
    threshold is its median gradient magnitude plus ``g_const``. Within each
    ``cell x cell`` sub-cell (the whole block when ``cell`` is None) the pixel
    with the largest gradient above threshold is kept. Ties resolve to the
    lowest row-major index. Returns an (N, 2) integer array of (u, v).
    """
    img = np.asarray(image, dtype=float)
    h, w = img.shape
    if h < 2 * block_rows or w < 2 * block_cols or (block_rows == 1 and block_cols == 1):
        raise ValueError("image must span more than one block")
    grad = gradient_magnitude(img)
    re, ce = _edges(h, block_rows), _edges(w, block_cols)
    thr = np.empty_like(grad)
    block_id = np.empty(grad.shape, dtype=np.int64)
    for bi in range(block_rows):
        for bj in range(block_cols):
            sl = (slice(re[bi], re[bi + 1]), slice(ce[bj], ce[bj + 1]))
            thr[sl] = np.median(grad[sl]) + g_const
            block_id[sl] = bi * block_cols + bj
    vv, uu = np.mgrid[0:h, 0:w]
    if cell is None:
        cell_id = block_id
    else:
        cell_id = (vv // cell) * ((w + cell - 1) // cell) + (uu // cell)
    mask = grad > thr
    mask &= (uu >= margin) & (vv >= margin) & (uu < w - margin) & (vv < h - margin)
    if not mask.any():
        return np.zeros((0, 2), dtype=np.int64)
    flat = np.flatnonzero(mask)
    cid = cell_id.ravel()[flat]
    g = grad.ravel()[flat]
    order = np.lexsort((flat, -g, cid))
    cid_sorted = cid[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = cid_sorted[1:] != cid_sorted[:-1]
    picked = np.sort(flat[order[first]])
    return np.stack([picked % w, picked // w], axis=1)


@dataclass(frozen=True)
class StereoConfig:
    search_range: int = 64
    max_mad: float = 12.0  # mean absolute pattern difference accepted at the best disparity
    min_texture: float = 4.0  # required SAD contrast between best and typical disparity
    uniqueness: float = 0.5  # best SAD must be below this fraction of the runner-up
    refine_iterations: int = 8
    disparity_sigma: float = 0.25  # px, for the stereo inverse-depth variance


def _spline(img: np.ndarray) -> np.ndarray:
    return ndimage.spline_filter(np.asarray(img, dtype=float), order=3, mode="mirror")


def _spline_sample(coeffs: np.ndarray, u, v) -> np.ndarray:
    return ndimage.map_coordinates(coeffs, [np.ravel(v), np.ravel(u)], order=3,
                                   prefilter=False, mode="mirror").reshape(np.shape(u))


def _sad_volume(src: np.ndarray, dst: np.ndarray, pu, pv, D: int, direction: int) -> np.ndarray:
    """Pattern SAD between ``src`` at (pu, pv) and ``dst`` shifted by ``direction * d``."""
    h, w = src.shape
    ok_s = (pu >= 0) & (pu < w) & (pv >= 0) & (pv < h)
    sv = src[np.clip(pv, 0, h - 1), np.clip(pu, 0, w - 1)]
    cv = np.clip(pv, 0, h - 1)
    sad = np.full((len(pu), D + 1), np.inf)
    for d in range(D + 1):
        du = pu + direction * d
        ok = ok_s & (du >= 0) & (du < w)
        s = np.sum(np.abs(sv - dst[cv, np.clip(du, 0, w - 1)]), axis=1)
        sad[:, d] = np.where(ok.all(axis=1), s, np.inf)
    return sad


def stereo_disparities(left, right, pixels, search_range: int = 64,
                       cfg: StereoConfig | None = None) -> np.ndarray:
    """Disparity of each pixel by pattern SAD along the rectified epipolar line.

    Integer argmin checked for texture, uniqueness and left-right
    consistency, parabolic sub-pixel fit, then a Gauss-Newton polish of the
    pattern SSD on a cubic-spline interpolant of the right image. Failed
    pixels get NaN.
    """
    cfg = cfg or StereoConfig(search_range=search_range)
    L = np.asarray(left, dtype=float)
    R = np.asarray(right, dtype=float)
    h, w = L.shape
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    n = len(px)
    out = np.full(n, np.nan)
    if n == 0:
        return out
    pu = px[:, None, 0] + PATTERN[None, :, 0].astype(np.int64)
    pv = px[:, None, 1] + PATTERN[None, :, 1].astype(np.int64)
    lv = L[np.clip(pv, 0, h - 1), np.clip(pu, 0, w - 1)]
    D = search_range
    sad = _sad_volume(L, R, pu, pv, D, -1)
    best = np.argmin(sad, axis=1)
    best_sad = sad[np.arange(n), best]
    finite = np.isfinite(sad)
    typical = np.array([np.median(row[f]) if f.any() else np.inf for row, f in zip(sad, finite)])
    good = np.isfinite(best_sad) & (best_sad <= cfg.max_mad * len(PATTERN))
    good &= (typical - best_sad) >= cfg.min_texture * len(PATTERN)
    # a minimum on the edge of the searchable range may hide a better one beyond it
    d_max = np.minimum(D, pu.min(axis=1))
    good &= (best >= 1) & (best < d_max)
    # runner-up outside the best match's basin
    away = np.abs(np.arange(D + 1)[None, :] - best[:, None]) > 2
    second = np.min(np.where(away, sad, np.inf), axis=1)
    good &= best_sad < cfg.uniqueness * second
    idx = np.flatnonzero(good)
    if len(idx) == 0:
        return out
    # left-right consistency: the right pixel must match back to where it came from
    back = _sad_volume(R, L, pu[idx] - best[idx, None], pv[idx], D, +1)
    consistent = np.abs(np.argmin(back, axis=1) - best[idx]) <= 1
    idx = idx[consistent]
    if len(idx) == 0:
        return out
    b = best[idx]
    c_m, c_0, c_p = sad[idx, b - 1], sad[idx, b], sad[idx, b + 1]
    denom = c_m - 2 * c_0 + c_p
    ok_par = np.isfinite(denom) & (denom > 0)
    offset = np.where(ok_par, 0.5 * (c_m - c_p) / np.where(ok_par, denom, 1.0), 0.0)
    disp = b + np.clip(offset, -0.5, 0.5)

    coeffs = _spline(R)
    pu_f, pv_f, lv_f = pu[idx].astype(float), pv[idx].astype(float), lv[idx]
    start = disp.copy()
    eps = 1e-3
    for _ in range(cfg.refine_iterations):
        ru = pu_f - disp[:, None]
        r = _spline_sample(coeffs, ru, pv_f) - lv_f
        gr = (_spline_sample(coeffs, ru + eps, pv_f)
              - _spline_sample(coeffs, ru - eps, pv_f)) / (2 * eps)
        J = -gr
        H = np.sum(J * J, axis=1)
        step = np.where(H > 1e-9, -np.sum(J * r, axis=1) / np.maximum(H, 1e-9), 0.0)
        disp = disp + np.clip(step, -0.5, 0.5)
        disp = np.clip(disp, start - 1.0, start + 1.0)
    out[idx] = np.where(disp > 0, disp, np.nan)
    return out


def static_stereo_depth(left, right, pixel, k: CameraIntrinsics, search_range: int = 64,
                        cfg: StereoConfig | None = None) -> float | None:
    """Inverse depth of one left pixel from the rectified right view, or None."""
    d = stereo_disparities(left, right, np.array([pixel]), search_range, cfg)[0]
    if not np.isfinite(d) or d <= 0:
        return None
    return float(d / (k.fx * k.baseline))


@dataclass
class DepthRefineConfig:
    pixel_sigma: float = 0.5
    max_mad: float = 15.0
    search_sigmas: float = 3.0
    min_parallax: float = 0.05  # px of motion per unit inverse depth below which we skip


def refine_depths(host_img, target_img, pixels, idepth, ivar, t_ji: RigidTransform3,
                  k: CameraIntrinsics, host_affine=(0.0, 0.0), target_affine=(0.0, 0.0),
                  cfg: DepthRefineConfig | None = None):
    """Fuse an epipolar observation from ``target_img`` into each depth estimate.

    Each point is searched along its epipolar segment spanning
    ``idepth +- search_sigmas * sqrt(ivar)``; the best pattern match is polished
    by Gauss-Newton on the inverse depth, converted to an inverse-depth
    variance through the local epipolar slope, and merged by precision
    weighting. Occluded or ambiguous points keep their prior.
    Returns ``(idepth, ivar, updated_mask)``.
    """
    cfg = cfg or DepthRefineConfig()
    H = np.asarray(host_img, dtype=float)
    T = np.asarray(target_img, dtype=float)
    px = np.asarray(pixels, dtype=float).reshape(-1, 2)
    d0 = np.asarray(idepth, dtype=float).copy()
    v0 = np.asarray(ivar, dtype=float).copy()
    n = len(px)
    updated = np.zeros(n, dtype=bool)
    if n == 0:
        return d0, v0, updated
    R, t = t_ji.rotation, t_ji.translation
    pu = px[:, None, 0] + PATTERN[None, :, 0]
    pv = px[:, None, 1] + PATTERN[None, :, 1]
    rays = np.stack([(pu - k.cx) / k.fx, (pv - k.cy) / k.fy, np.ones_like(pu)], axis=-1)
    host_vals = bilinear(H, np.clip(pu, 0, H.shape[1] - 1), np.clip(pv, 0, H.shape[0] - 1))
    e = np.exp(target_affine[0] - host_affine[0])
    ref = target_affine[1] + e * (host_vals - host_affine[1])
    Rr = rays @ R.T  # rotated rays, X' ~ Rr + d t

    def project(d):
        Xp = Rr + d[:, None, None] * t
        z = Xp[..., 2]
        zs = np.where(z > 1e-9, z, 1.0)
        u = k.fx * Xp[..., 0] / zs + k.cx
        v = k.fy * Xp[..., 1] / zs + k.cy
        ok = (z > 1e-9) & inside(T.shape, u, v, margin=0.0)
        return u, v, ok, Xp, zs

    sigma = np.sqrt(v0)
    lo = np.maximum(d0 - cfg.search_sigmas * sigma, 1e-4)
    hi = d0 + cfg.search_sigmas * sigma
    # slope of the central pixel's projection w.r.t. inverse depth
    u_lo, v_lo, _, _, _ = project(lo)
    u_hi, v_hi, _, _, _ = project(hi)
    span = np.hypot(u_hi[:, 4] - u_lo[:, 4], v_hi[:, 4] - v_lo[:, 4])
    n_samples = int(np.clip(np.ceil(np.nanmax(span) / 0.5) if n else 1, 3, 200))
    best_err = np.full(n, np.inf)
    best_d = d0.copy()
    for s in np.linspace(0.0, 1.0, n_samples):
        d = lo + s * (hi - lo)
        u, v, ok, _, _ = project(d)
        vals = bilinear(T, np.clip(u, 0, T.shape[1] - 1), np.clip(v, 0, T.shape[0] - 1))
        err = np.where(ok.all(axis=1), np.sum((vals - ref) ** 2, axis=1), np.inf)
        better = err < best_err
        best_err[better] = err[better]
        best_d[better] = d[better]
    d = best_d.copy()
    for _ in range(5):
        u, v, ok, Xp, zs = project(d)
        vals, gu, gv = bilinear(T, np.clip(u, 0, T.shape[1] - 1),
                                np.clip(v, 0, T.shape[0] - 1), with_gradient=True)
        r = vals - ref
        du = k.fx * (t[0] * zs - Xp[..., 0] * t[2]) / zs**2
        dv = k.fy * (t[1] * zs - Xp[..., 1] * t[2]) / zs**2
        J = gu * du + gv * dv
        Hs = np.sum(J * J, axis=1)
        step = np.where(Hs > 1e-12, -np.sum(J * r, axis=1) / np.maximum(Hs, 1e-12), 0.0)
        d = np.clip(d + np.clip(step, -(hi - lo), hi - lo), lo, hi)
    u, v, ok, Xp, zs = project(d)
    vals = bilinear(T, np.clip(u, 0, T.shape[1] - 1), np.clip(v, 0, T.shape[0] - 1))
    mad = np.mean(np.abs(vals - ref), axis=1)
    du = k.fx * (t[0] * zs[:, 4] - Xp[:, 4, 0] * t[2]) / zs[:, 4] ** 2
    dv = k.fy * (t[1] * zs[:, 4] - Xp[:, 4, 1] * t[2]) / zs[:, 4] ** 2
    slope = np.hypot(du, dv)
    good = ok.all(axis=1) & (mad <= cfg.max_mad) & (slope > cfg.min_parallax) & (d > 0)
    obs_var = (cfg.pixel_sigma / np.maximum(slope, 1e-12)) ** 2
    w0, w1 = 1.0 / v0, 1.0 / obs_var
    fused = (d0 * w0 + d * w1) / (w0 + w1)
    d_out = np.where(good, fused, d0)
    v_out = np.where(good, 1.0 / (w0 + w1), v0)
    return d_out, v_out, good


def fuse_scalar(mean_a: float, var_a: float, mean_b: float, var_b: float) -> tuple[float, float]:
    w = 1.0 / var_a + 1.0 / var_b
    return (mean_a / var_a + mean_b / var_b) / w, 1.0 / w
