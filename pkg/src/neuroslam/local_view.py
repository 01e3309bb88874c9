"""View templates: compact intensity descriptors matched with horizontal shifts."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class ViewDescriptor:
    values: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.rows, self.cols)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ViewTemplate:
    id: int
    descriptor: ViewDescriptor
    hd_phase: float
    grid_phase: tuple[float, float]
    experience_id: int


@dataclass(frozen=True)
class ViewMatch:
    template_id: int
    shift: int
    distance: float


@dataclass
class TemplateStore:
    templates: list[ViewTemplate] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.templates)

    def __iter__(self):
        return iter(self.templates)

    def __getitem__(self, template_id: int) -> ViewTemplate:
        return self.templates[template_id]


@dataclass(frozen=True)
class LocalViewConfig:
    rows: int = 16
    cols: int = 48
    max_shift: int = 6
    threshold: float = 0.07

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("descriptor size must be positive")
        if not (0 <= self.max_shift < self.cols):
            raise ValueError("max_shift must lie in [0, cols)")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")


def _bin_edges(n_in: int, n_out: int) -> np.ndarray:
    return (np.arange(n_out) * n_in) // n_out


def build_descriptor(image, rows: int, cols: int) -> ViewDescriptor:
    """Block-average to rows x cols, remove the mean, scale to unit max-abs."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-D raster")
    h, w = img.shape
    if h < rows or w < cols:
        raise ValueError(f"image {w}x{h} smaller than descriptor {cols}x{rows}")
    re, ce = _bin_edges(h, rows), _bin_edges(w, cols)
    sums = np.add.reduceat(np.add.reduceat(img, re, axis=0), ce, axis=1)
    counts = np.outer(np.diff(np.append(re, h)), np.diff(np.append(ce, w)))
    d = sums / counts
    d = d - d.mean()
    peak = np.abs(d).max()
    # constant images: mean removal leaves rounding noise only
    if peak <= 1e-12 * max(1.0, np.abs(img).max()):
        d = np.zeros_like(d)
    else:
        d = d / peak
    return ViewDescriptor(d, rows, cols)


def _shift_order(max_shift: int) -> list[int]:
    order = [0]
    for k in range(1, max_shift + 1):
        order += [-k, k]
    return order


def match(d: ViewDescriptor, store: Iterable[ViewTemplate], max_shift: int,
          threshold: float) -> ViewMatch | None:
    """Best template under horizontal shifts, or None above ``threshold``.

    ``shift = s`` means the query equals the template moved right by ``s``
    columns. Ties go to the lowest template id, then the smallest ``|s|``,
    negative before positive.
    """
    shifts = _shift_order(max_shift)
    tpls = [t for t in store if t.descriptor.values.shape == d.values.shape]
    if not tpls:
        return None
    stack = np.stack([t.descriptor.values for t in tpls])
    a = d.values
    cols = a.shape[1]
    dist = np.empty((len(tpls), len(shifts)))
    for j, s in enumerate(shifts):
        if s >= 0:
            diff = a[None, :, s:] - stack[:, :, : cols - s]
        else:
            diff = a[None, :, : cols + s] - stack[:, :, -s:]
        dist[:, j] = np.mean(np.abs(diff), axis=(1, 2))
    # first minimum in (template, shift-order) sequence implements the tie rule
    i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
    best = ViewMatch(tpls[i].id, shifts[j], float(dist[i, j]))
    if not best.distance < threshold:
        return None
    return best


def learn(d: ViewDescriptor, hd_phase: float, grid_phase: tuple[float, float],
          experience_id: int, store: TemplateStore) -> int:
    tid = len(store.templates)
    store.templates.append(
        ViewTemplate(tid, d, float(hd_phase), (float(grid_phase[0]), float(grid_phase[1])),
                     int(experience_id))
    )
    return tid


def shift_to_heading(shift: int, horizontal_fov: float, cols: int) -> float:
    return shift * horizontal_fov / cols


def dump_templates(store: TemplateStore, path) -> None:
    """One line per template: id hd gx gy experience rows cols values..."""
    with open(Path(path), "w") as fh:
        for t in store:
            head = [str(t.id), repr(t.hd_phase), repr(t.grid_phase[0]),
                    repr(t.grid_phase[1]), str(t.experience_id),
                    str(t.descriptor.rows), str(t.descriptor.cols)]
            vals = [repr(float(v)) for v in t.descriptor.values.ravel()]
            fh.write(" ".join(head + vals) + "\n")


def load_templates(path) -> TemplateStore:
    store = TemplateStore()
    with open(Path(path)) as fh:
        for line in fh:
            f = line.split()
            if not f:
                continue
            rows, cols = int(f[5]), int(f[6])
            d = ViewDescriptor(np.array([float(x) for x in f[7:]]), rows, cols)
            store.templates.append(
                ViewTemplate(int(f[0]), d, float(f[1]), (float(f[2]), float(f[3])), int(f[4]))
            )
    return store


def synthetic_descriptor(scene_id: int, rows: int, cols: int, seed: int = 0) -> ViewDescriptor:
    """Deterministic pseudo-view for a labelled scene (velocity-trace runs)."""
    rng = np.random.default_rng([seed, scene_id])
    img = rng.uniform(0.0, 255.0, size=(rows, cols))
    return build_descriptor(img, rows, cols)

