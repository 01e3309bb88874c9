"""Firing-rate maps of model head-direction and grid units."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import TWO_PI


@dataclass(frozen=True)
class RateMap:
    rates: np.ndarray  # (ny, nx); NaN where occupancy is below the minimum
    occupancy: np.ndarray  # (ny, nx) step counts
    x0: float
    y0: float
    bin_size: float

    def bin_centers(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.rates.shape
        return (self.x0 + (np.arange(nx) + 0.5) * self.bin_size,
                self.y0 + (np.arange(ny) + 0.5) * self.bin_size)

    def bin_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((y - self.y0) / self.bin_size)),
                int(math.floor((x - self.x0) / self.bin_size)))


def _wrapdist(a, b) -> np.ndarray:
    d = np.mod(np.asarray(a, dtype=float) - b, TWO_PI)
    return np.minimum(d, TWO_PI - d)


def unit_activity(phases, preferred, tuning_sigma: float) -> np.ndarray:
    """Gaussian tuning on wrapped phase distance; product over axes for grid units.

    ``phases`` is (N,) for a head-direction unit or (N, 2) for a grid unit.
    """
    p = np.asarray(phases, dtype=float)
    pref = np.atleast_1d(np.asarray(preferred, dtype=float))
    if p.ndim == 1:
        p = p[:, None]
    if p.shape[1] != len(pref):
        raise ValueError("phase and preferred-phase dimensions differ")
    d = _wrapdist(p, pref[None, :])
    return np.exp(-np.sum(d * d, axis=1) / (2.0 * tuning_sigma**2))


def firing_rate_map(trajectory, phase_log, preferred_phase, tuning_sigma: float,
                    bin_size: float, min_occupancy: int = 1) -> RateMap:
    """Occupancy-normalised mean activity per spatial bin."""
    xy = np.asarray(trajectory, dtype=float).reshape(-1, 2)
    if len(xy) != len(np.asarray(phase_log)):
        raise ValueError("trajectory and phase log must be aligned per step")
    if not (bin_size > 0 and tuning_sigma > 0):
        raise ValueError("bin_size and tuning_sigma must be positive")
    act = unit_activity(phase_log, preferred_phase, tuning_sigma)
    if len(xy) == 0:
        return RateMap(np.zeros((0, 0)), np.zeros((0, 0), dtype=int), 0.0, 0.0, bin_size)
    x0 = math.floor(xy[:, 0].min() / bin_size) * bin_size
    y0 = math.floor(xy[:, 1].min() / bin_size) * bin_size
    ix = np.floor((xy[:, 0] - x0) / bin_size).astype(int)
    iy = np.floor((xy[:, 1] - y0) / bin_size).astype(int)
    nx, ny = ix.max() + 1, iy.max() + 1
    occ = np.zeros((ny, nx), dtype=int)
    tot = np.zeros((ny, nx))
    np.add.at(occ, (iy, ix), 1)
    np.add.at(tot, (iy, ix), act)
    with np.errstate(invalid="ignore", divide="ignore"):
        rates = np.where(occ >= min_occupancy, tot / np.maximum(occ, 1), np.nan)
    return RateMap(rates, occ, float(x0), float(y0), float(bin_size))


def write_pgm(rm: RateMap, path) -> None:
    """8-bit PGM with north up; empty bins are black, rates scale to [1, 255]."""
    r = rm.rates[::-1]
    finite = np.isfinite(r)
    top = np.nanmax(r) if finite.any() else 1.0
    top = top if top > 0 else 1.0
    img = np.where(finite, 1 + np.rint(254 * np.clip(np.nan_to_num(r) / top, 0, 1)), 0)
    img = img.astype(np.uint8)
    h, w = img.shape
    with open(Path(path), "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_rate_csv(rm: RateMap, path) -> None:
    xs, ys = rm.bin_centers()
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "occupancy", "rate"])
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                if rm.occupancy[j, i]:
                    w.writerow([repr(float(x)), repr(float(y)), int(rm.occupancy[j, i]),
                                repr(float(rm.rates[j, i]))])


def local_maxima_1d(values: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima of a 1-D profile (NaN-free)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return np.zeros(0, dtype=int)
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return np.flatnonzero(inner) + 1
