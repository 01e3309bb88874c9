"""Dataset ingestion and file exports (KITTI layout, pose files, rasters)."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image

from ..geometry import CameraIntrinsics, RigidTransform3

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")


class DatasetError(RuntimeError):
    pass


@dataclass(frozen=True)
class StereoFrame:
    index: int
    timestamp: float
    left_path: Path
    right_path: Path

    def load(self) -> tuple[np.ndarray, np.ndarray]:
        left, right = read_raster(self.left_path), read_raster(self.right_path)
        if left.shape != right.shape:
            raise DatasetError(f"frame {self.index}: left {left.shape} and right "
                               f"{right.shape} differ in size")
        return left, right


def read_raster(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode not in ("L", "I", "I;16", "F"):
            im = im.convert("L")
        return np.asarray(im, dtype=float)


def write_raster(img: np.ndarray, path) -> None:
    arr = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def _find_image(folder: Path, index: int) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        p = folder / f"{index:06d}{suffix}"
        if p.exists():
            return p
    return None


def load_stereo_sequence(path) -> list[StereoFrame]:
    """Pair ``image_0``/``image_1`` frames with ``times.txt`` timestamps.

    Frames are returned lazily loadable; sizes are checked when loaded and the
    first frame is checked eagerly.
    """
    root = Path(path)
    times_file = root / "times.txt"
    if not times_file.exists():
        raise DatasetError(f"{times_file} not found")
    times = []
    for n, line in enumerate(times_file.read_text().splitlines()):
        if line.strip():
            try:
                times.append(float(line.split()[0]))
            except ValueError:
                raise DatasetError(f"times.txt line {n + 1}: not a number: {line!r}") from None
    frames = []
    for i, t in enumerate(times):
        if i > 0 and not t > times[i - 1]:
            raise DatasetError(f"timestamp of frame {i} ({t}) is not after frame {i - 1}")
        left = _find_image(root / "image_0", i)
        right = _find_image(root / "image_1", i)
        if left is None:
            raise DatasetError(f"left image for frame {i} ({i:06d}) missing")
        if right is None:
            raise DatasetError(f"right image for frame {i} ({i:06d}) missing")
        frames.append(StereoFrame(i, t, left, right))
    if frames:
        frames[0].load()
    return frames


def iter_stereo(frames: list[StereoFrame]) -> Iterator[tuple[StereoFrame, np.ndarray, np.ndarray]]:
    for f in frames:
        left, right = f.load()
        yield f, left, right


def load_ground_truth(path) -> list[RigidTransform3]:
    poses = []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 12:
            raise DatasetError(f"{path}: line {n}: expected 12 values, got {len(fields)}")
        try:
            m = np.array([float(x) for x in fields]).reshape(3, 4)
        except ValueError:
            raise DatasetError(f"{path}: line {n}: non-numeric value") from None
        t = RigidTransform3(m[:, :3], m[:, 3])
        drift = np.abs(t.rotation.T @ t.rotation - np.eye(3)).max()
        if drift > 1e-6:
            log.info("line %d: re-orthonormalising rotation (drift %.2e)", n, drift)
            t = t.reorthonormalized()
        poses.append(t)
    return poses


def write_poses(poses, path) -> None:
    with open(Path(path), "w") as fh:
        for p in poses:
            fh.write(" ".join(f"{x:.12e}" for x in p.matrix3x4().ravel()) + "\n")


def load_times(path) -> np.ndarray:
    vals = [float(l.split()[0]) for l in Path(path).read_text().splitlines() if l.strip()]
    return np.array(vals)


def load_calibration(path) -> tuple:
    """Read (fx, fy, cx, cy, baseline, width, height) from a KITTI ``calib.txt``
    (P0/P1 rows) or from ``key value`` lines; width/height are 0 when absent.
    """
    text = Path(path).read_text()
    vals: dict[str, list[float]] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, rest = line.replace(":", " ", 1).partition(" ")
        vals[key.strip()] = [float(x) for x in rest.split()]
    width = int(vals.get("width", [0])[0])
    height = int(vals.get("height", [0])[0])
    if "P0" in vals and "P1" in vals:
        p0 = np.array(vals["P0"]).reshape(3, 4)
        p1 = np.array(vals["P1"]).reshape(3, 4)
        fx, fy, cx, cy = p0[0, 0], p0[1, 1], p0[0, 2], p0[1, 2]
        baseline = -p1[0, 3] / p1[0, 0]
    else:
        fx, fy = vals["fx"][0], vals["fy"][0]
        cx, cy = vals["cx"][0], vals["cy"][0]
        baseline = vals["baseline"][0]
    return fx, fy, cx, cy, baseline, width, height


def intrinsics_for(calib_path, image_shape) -> CameraIntrinsics:
    fx, fy, cx, cy, baseline, w, h = load_calibration(calib_path)
    h_img, w_img = image_shape
    return CameraIntrinsics(fx, fy, cx, cy, baseline, w or w_img, h or h_img)
