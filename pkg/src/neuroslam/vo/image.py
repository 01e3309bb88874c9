"""Raster helpers: pyramids, gradients and bilinear sampling."""
from __future__ import annotations

import numpy as np


def as_float_image(image) -> np.ndarray:
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty 2-D grayscale raster")
    return img


def downsample(img: np.ndarray) -> np.ndarray:
    h, w = (img.shape[0] // 2) * 2, (img.shape[1] // 2) * 2
    a = img[:h, :w]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


def build_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [as_float_image(img)]
    for _ in range(1, levels):
        pyr.append(downsample(pyr[-1]))
    return pyr


def central_gradient(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences; one-sided at the border."""
    gy, gx = np.gradient(img)
    return gx, gy


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    gx, gy = central_gradient(img)
    return np.hypot(gx, gy)


def inside(img_shape, u, v, margin: float = 0.0) -> np.ndarray:
    h, w = img_shape
    return (u >= margin) & (v >= margin) & (u <= w - 1 - margin) & (v <= h - 1 - margin)


def bilinear(img: np.ndarray, u, v, with_gradient: bool = False):
    """Sample ``img`` at sub-pixel positions (u = column, v = row).

    Positions must lie inside ``[0, w-1] x [0, h-1]``. With ``with_gradient``
    the exact derivative of the interpolant is returned as well, so that
    Jacobians built from it match finite differences of the samples.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    h, w = img.shape
    x0 = np.clip(np.floor(u).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(v).astype(np.int64), 0, h - 2)
    fx = u - x0
    fy = v - y0
    i00 = img[y0, x0]
    i01 = img[y0, x0 + 1]
    i10 = img[y0 + 1, x0]
    i11 = img[y0 + 1, x0 + 1]
    top = i00 + fx * (i01 - i00)
    bot = i10 + fx * (i11 - i10)
    val = top + fy * (bot - top)
    if not with_gradient:
        return val
    du = (1.0 - fy) * (i01 - i00) + fy * (i11 - i10)
    dv = bot - top
    return val, du, dv
