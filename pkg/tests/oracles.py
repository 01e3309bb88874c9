"""Independent oracles used by the tests.

None of these call into the code under test for the quantity being checked.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi
RING_BINS = 10**6
_RING = np.arange(RING_BINS) * (TWO_PI / RING_BINS)


def _ring_dist(mu: float) -> np.ndarray:
    d = np.abs(_RING - (mu % TWO_PI))
    return np.minimum(d, TWO_PI - d, out=d)


def ring_fusion_argmax(mu_a: float, w_a: float, mu_b: float, w_b: float) -> float:
    """Argmax of the product of two ring Gaussians on a 10^6-bin ring.

    Each density is exp(-w d^2 / 2) with d the geodesic distance on the ring.
    """
    da = _ring_dist(mu_a)
    db = _ring_dist(mu_b)
    log_p = w_a * da * da
    log_p += w_b * db * db
    return float(_RING[np.argmin(log_p)])


def ring_error(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def planar_velocity_oracle(dtheta: float, dx: float, dy: float, dt: float):
    """Yaw rate and speed of a planar motion, from the motion itself."""
    return dtheta / dt, math.hypot(dx, dy) / dt


def square_truth(n: int, side: float = 25.0, laps: int = 1):
    """Poses and per-step turns of ``n`` nodes per lap around a square."""
    per = n // 4
    step = side / per
    poses, turns = [], []
    x = y = th = 0.0
    for k in range(n * laps):
        poses.append((x, y, th))
        turn = math.pi / 2 if (k + 1) % per == 0 else 0.0
        turns.append(turn)
        x += step * math.cos(th)
        y += step * math.sin(th)
        th = (th + turn + math.pi) % TWO_PI - math.pi
    return np.array(poses), turns, step


def noisy_odometry(turns, step: float, rng, dist_noise: float = 0.01,
                   heading_noise: float = math.radians(0.5)):
    """Dead-reckoned poses with relative distance noise and additive heading noise per step."""
    out = [(0.0, 0.0, 0.0)]
    x = y = th = 0.0
    for k in range(1, len(turns)):
        d = step * (1.0 + dist_noise * rng.standard_normal())
        x += d * math.cos(th)
        y += d * math.sin(th)
        th += turns[k - 1] + heading_noise * rng.standard_normal()
        out.append((x, y, th))
    return out


def max_position_error(est: np.ndarray, truth: np.ndarray) -> float:
    return float(np.max(np.hypot(*(est[:, :2] - truth[:, :2]).T)))


def rmse_position(est: np.ndarray, truth: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.sum((est[:, :2] - truth[:, :2]) ** 2, axis=1))))


def brute_force_disparity(left: np.ndarray, right: np.ndarray, u: int, v: int, max_d: int,
                          pattern) -> int:
    """Integer disparity minimising pattern SAD by an explicit loop."""
    best, best_d = math.inf, -1
    for d in range(max_d + 1):
        sad = 0.0
        for du, dv in pattern:
            uu, vv = u + int(du), v + int(dv)
            if uu - d < 0:
                sad = math.inf
                break
            sad += abs(left[vv, uu] - right[vv, uu - d])
        if sad < best:
            best, best_d = sad, d
    return best_d


def central_difference_jacobians(residual_fn, T_i, T_j, idepth, aff_i, aff_j, h: float = 1e-5):
    """Central differences of ``residual_fn(T_i, T_j, idepth, aff_i, aff_j)`` (an 8-vector).

    Pose increments are right-multiplied twists. Returns ``(J_target, J_host, J_idepth)``
    with the same column layout as the analytic Jacobians: six twist entries, then a, b.
    """
    from neuroslam.geometry import RigidTransform3

    J_t, J_h = np.zeros((8, 8)), np.zeros((8, 8))
    for col in range(8):
        if col < 6:
            e = np.zeros(6)
            e[col] = h
            plus, minus = RigidTransform3.exp(e), RigidTransform3.exp(-e)
            J_t[:, col] = (residual_fn(T_i, T_j @ plus, idepth, aff_i, aff_j)
                           - residual_fn(T_i, T_j @ minus, idepth, aff_i, aff_j)) / (2 * h)
            J_h[:, col] = (residual_fn(T_i @ plus, T_j, idepth, aff_i, aff_j)
                           - residual_fn(T_i @ minus, T_j, idepth, aff_i, aff_j)) / (2 * h)
        else:
            e = np.zeros(2)
            e[col - 6] = h
            aj, ai = np.asarray(aff_j, float), np.asarray(aff_i, float)
            J_t[:, col] = (residual_fn(T_i, T_j, idepth, ai, aj + e)
                           - residual_fn(T_i, T_j, idepth, ai, aj - e)) / (2 * h)
            J_h[:, col] = (residual_fn(T_i, T_j, idepth, ai + e, aj)
                           - residual_fn(T_i, T_j, idepth, ai - e, aj)) / (2 * h)
    J_d = (residual_fn(T_i, T_j, idepth + h, aff_i, aff_j)
           - residual_fn(T_i, T_j, idepth - h, aff_i, aff_j)) / (2 * h)
    return J_t, J_h, J_d


def near_pixel_seam(proj: np.ndarray, margin: float = 0.01) -> np.ndarray:
    """True where a projected coordinate lies within ``margin`` px of an integer,
    i.e. on a crease of the bilinear interpolant."""
    frac = np.abs(proj - np.round(proj))
    return np.any(frac < margin, axis=-1)


def brute_force_selection(image: np.ndarray, block_rows: int, block_cols: int,
                          g_const: float, margin: int) -> set:
    """Per-block best pixel above median-plus-constant, by explicit loops."""
    img = np.asarray(image, dtype=float)
    h, w = img.shape
    grad = np.zeros_like(img)

    def diff(line, i, n):
        # central inside, one-sided on the border
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        return (line[hi] - line[lo]) / (hi - lo)

    for v in range(h):
        for u in range(w):
            gx = diff(img[v, :], u, w)
            gy = diff(img[:, u], v, h)
            grad[v, u] = math.hypot(gx, gy)
    out = set()
    for bi in range(block_rows):
        for bj in range(block_cols):
            r0, r1 = bi * h // block_rows, (bi + 1) * h // block_rows
            c0, c1 = bj * w // block_cols, (bj + 1) * w // block_cols
            thr = float(np.median(grad[r0:r1, c0:c1])) + g_const
            best = None
            for v in range(r0, r1):
                for u in range(c0, c1):
                    if not (margin <= u < w - margin and margin <= v < h - margin):
                        continue
                    if grad[v, u] > thr and (best is None or grad[v, u] > best[0]):
                        best = (grad[v, u], u, v)
            if best is not None:
                out.add((best[1], best[2]))
    return out
