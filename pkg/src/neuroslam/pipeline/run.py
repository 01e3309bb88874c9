"""End-to-end run: sensor, odometry, attractor, local view and map stages.

Stages are generators chained in one thread. Each stage consumes the previous
stage's messages in order, so a run is fully deterministic.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .. import attractor as att
from ..experience_map import MapGraph, add_experience, close_loop, export_csv, optimize
from ..geometry import PlanarVelocity, transform_to_planar_pose
from ..local_view import (TemplateStore, ViewDescriptor, build_descriptor, dump_templates, learn,
                          match, shift_to_heading, synthetic_descriptor)
from ..vo.odometry import StereoVO
from ..vo.window import FrameData
from .config import RunConfig
from .evaluate import REFERENCE_KITTI_00, evaluate
from .io import iter_stereo, intrinsics_for, load_ground_truth, load_stereo_sequence, load_times

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhaseRecord:
    step: int
    timestamp: float
    hd_phase: float
    grid_x: float
    grid_y: float
    x: float  # odometric pose in the map frame
    y: float
    theta: float
    experience_id: int
    template_id: int
    matched: bool
    loop_closed: bool


@dataclass(frozen=True)
class KeyframeRecord:
    index: int
    timestamp: float
    is_keyframe: bool
    tracking_lost: bool
    x: float  # planar pose in the map frame
    y: float
    theta: float
    omega: float
    v: float
    pose: tuple[float, ...] = (math.nan,) * 12  # camera pose, 3x4 row-major
    affine: tuple[float, float] = (math.nan, math.nan)


@dataclass
class RunLogs:
    phases: list[PhaseRecord] = field(default_factory=list)
    keyframes: list[KeyframeRecord] = field(default_factory=list)
    loop_closures: list[tuple[int, int]] = field(default_factory=list)
    templates: TemplateStore = field(default_factory=TemplateStore)
    stats: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ViewInput:
    """One decision-cycle input for the mapper; ``velocity`` is None for the first."""

    timestamp: float
    velocity: PlanarVelocity | None
    view: ViewDescriptor | None


class CognitiveMapper:
    """Attractor network, view templates and experience map driven by velocities.

    The odometric pose integrates turn then move, matching the attractor's
    heading-then-displacement order.
    """

    def __init__(self, cfg: RunConfig, horizontal_fov: float):
        self.cfg = cfg
        self.fov = horizontal_fov
        self.graph = MapGraph(robust_delta=cfg.map.robust_delta, angle_scale=cfg.map.angle_scale)
        self.store = TemplateStore()
        self.state: att.NetworkState | None = None
        self.pose = np.zeros(3)
        self.current: int | None = None
        self.logs = RunLogs(templates=self.store)
        self._step = 0

    def _record(self, t, hd, grid, tid, matched, closed):
        self.logs.phases.append(PhaseRecord(
            self._step, float(t), float(hd), float(grid[0]), float(grid[1]),
            float(self.pose[0]), float(self.pose[1]), float(self.pose[2]),
            -1 if self.current is None else self.current, tid, matched, closed))
        self._step += 1

    def start(self, t: float, view: ViewDescriptor | None) -> None:
        self.state = att.NetworkState.initial(self.cfg.attractor)
        exp, _ = add_experience(self.graph, tuple(self.pose), -1, 0.0, (0.0, 0.0), None, t)
        self.current = exp.id
        tid = -1
        if view is not None:
            tid = learn(view, 0.0, (0.0, 0.0), exp.id, self.store)
            exp.template_id = tid
        self._record(t, 0.0, (0.0, 0.0), tid, False, False)

    def update(self, t: float, vel: PlanarVelocity, view: ViewDescriptor | None) -> bool:
        """One cycle; returns True when a loop closure was added to the map."""
        if self.state is None:
            raise RuntimeError("start() must be called before update()")
        lv = self.cfg.local_view
        m = match(view, self.store, lv.max_shift, lv.threshold) if view is not None else None
        cue = None
        facing = 0.0
        if m is not None:
            tpl = self.store[m.template_id]
            facing = shift_to_heading(m.shift, self.fov, view.cols)
            cue = att.Cue(tpl.hd_phase + facing, tpl.grid_phase, self.cfg.cue_weight)
        res = att.step(self.state, self.cfg.attractor, vel, cue)
        self.state = res.state

        th = self.pose[2] + vel.rotational * vel.dt
        ds = vel.translational * vel.dt
        self.pose = np.array([self.pose[0] + ds * math.cos(th),
                              self.pose[1] + ds * math.sin(th), th])

        last = self.graph.experiences[self.current]
        created = False
        if att.torus_distance(res.grid_estimate, last.grid_phase) > self.cfg.experience_threshold:
            self._new_experience(t, res)
            created = True

        closed = False
        if res.loop_closed and m is not None:
            target = self.store[m.template_id].experience_id
            if target != self.current:
                if not created:
                    self._new_experience(t, res)
                if target != self.current and close_loop(self.graph, self.current, target,
                                                         facing) is not None:
                    closed = True
                    self.logs.loop_closures.append((self.current, target))
                    optimize(self.graph, self.cfg.map.max_iterations)
                    e = self.graph.experiences[self.current]
                    self.pose = np.array([e.x, e.y, e.theta])

        tid = m.template_id if m is not None else -1
        if m is None and view is not None:
            tid = learn(view, res.hd_estimate, res.grid_estimate, self.current, self.store)
        exp = self.graph.experiences[self.current]
        if exp.template_id < 0 and tid >= 0:
            exp.template_id = tid
        self._record(t, res.hd_estimate, res.grid_estimate, tid, m is not None, closed)
        return closed

    def _new_experience(self, t, res: att.StepResult) -> None:
        exp, _ = add_experience(self.graph, tuple(self.pose), -1, res.hd_estimate,
                                res.grid_estimate, self.current, t)
        self.current = exp.id

    def finish(self) -> None:
        if len(self.graph.links):
            optimize(self.graph, self.cfg.map.max_iterations)


# ---------------------------------------------------------------- front ends

def read_trace(path) -> list[tuple[float, float, float, int]]:
    """Rows of ``(t, omega, v, scene)``; scene < 0 means no view for that row."""
    rows = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return rows
        if [h.strip() for h in header[:4]] != ["t", "omega", "v", "scene"]:
            raise ValueError(f"{path}: expected header t,omega,v,scene, got {header}")
        for n, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                rows.append((float(rec[0]), float(rec[1]), float(rec[2]), int(rec[3])))
            except (ValueError, IndexError):
                raise ValueError(f"{path}: line {n}: malformed row {rec}") from None
    return rows


def trace_stage(rows, cfg: RunConfig, logs: RunLogs) -> Iterator[ViewInput]:
    """Velocity-trace front end: the first row is the start pose."""
    lv = cfg.local_view
    prev_t = None
    for i, (t, omega, v, scene) in enumerate(rows):
        if cfg.max_frames is not None and i >= cfg.max_frames:
            break
        view = synthetic_descriptor(scene, lv.rows, lv.cols, cfg.seed) if scene >= 0 else None
        vel = None if prev_t is None else PlanarVelocity(omega, v, t - prev_t)
        logs.keyframes.append(KeyframeRecord(i, t, True, False, math.nan, math.nan, math.nan,
                                             omega if vel else 0.0, v if vel else 0.0))
        prev_t = t
        yield ViewInput(t, vel, view)


def vo_stage(frames, vo: StereoVO, cfg: RunConfig, logs: RunLogs) -> Iterator[ViewInput]:
    """Stereo VO front end: each keyframe velocity becomes one decision cycle."""
    lv = cfg.local_view
    for n, (sf, left, right) in enumerate(frames):
        if cfg.max_frames is not None and n >= cfg.max_frames:
            break
        res = vo.process(FrameData(left, right, sf.timestamp))
        x, y, th = transform_to_planar_pose(res.pose)
        vel = res.velocity
        logs.keyframes.append(KeyframeRecord(
            res.index, res.timestamp, res.is_keyframe, res.tracking_lost, x, y, th,
            vel.rotational if vel else 0.0, vel.translational if vel else 0.0,
            tuple(float(v) for v in res.pose.matrix3x4().ravel()),
            (float(res.affine[0]), float(res.affine[1]))))
        if n == 0:
            yield ViewInput(res.timestamp, None, build_descriptor(left, lv.rows, lv.cols))
        elif vel is not None:
            yield ViewInput(res.timestamp, vel, build_descriptor(left, lv.rows, lv.cols))


def mapper_stage(inputs: Iterable[ViewInput], mapper: CognitiveMapper) -> Iterator[PhaseRecord]:
    for msg in inputs:
        if msg.velocity is None:
            mapper.start(msg.timestamp, msg.view)
        else:
            mapper.update(msg.timestamp, msg.velocity, msg.view)
        yield mapper.logs.phases[-1]


# ---------------------------------------------------------------- exports

def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else int(v) if isinstance(v, bool)
                        else v for v in r])


def write_phase_log(records, path) -> None:
    _write_rows(Path(path), ["step", "t", "hd", "grid_x", "grid_y", "x", "y", "theta",
                             "experience", "template", "matched", "loop_closed"],
                ([r.step, r.timestamp, r.hd_phase, r.grid_x, r.grid_y, r.x, r.y, r.theta,
                  r.experience_id, r.template_id, r.matched, r.loop_closed] for r in records))


def read_phase_log(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (xy (N,2), hd (N,), grid (N,2)) from a phase-log CSV."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
    hd = np.array([float(r["hd"]) for r in rows])
    grid = np.array([[float(r["grid_x"]), float(r["grid_y"])] for r in rows]).reshape(-1, 2)
    return xy, hd, grid


def write_keyframe_log(records, path) -> None:
    pose_cols = [f"T{i}{j}" for i in range(3) for j in range(4)]
    _write_rows(Path(path), ["index", "t", "keyframe", "lost", "x", "y", "theta", "omega", "v",
                             "a", "b"] + pose_cols,
                ([r.index, r.timestamp, r.is_keyframe, r.tracking_lost, r.x, r.y, r.theta,
                  r.omega, r.v, *r.affine, *r.pose] for r in records))


def export_run(out_dir, graph: MapGraph, logs: RunLogs) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(graph, out / "experiences.csv", out / "links.csv")
    write_phase_log(logs.phases, out / "phases.csv")
    write_keyframe_log(logs.keyframes, out / "keyframes.csv")
    dump_templates(logs.templates, out / "templates.txt")
    (out / "stats.json").write_text(json.dumps(logs.stats, indent=2, sort_keys=True) + "\n")
    return out


# ---------------------------------------------------------------- driver

def _ground_truth(cfg: RunConfig, gt_path, gt_times):
    path = Path(gt_path) if gt_path is not None else None
    if path is None and cfg.dataset is not None and (Path(cfg.dataset) / "poses.txt").exists():
        path = Path(cfg.dataset) / "poses.txt"
    if path is None or not path.exists():
        return None, None
    gt = load_ground_truth(path)
    if gt_times is None:
        times_file = path.parent / "times.txt"
        if cfg.dataset is not None and (Path(cfg.dataset) / "times.txt").exists():
            times_file = Path(cfg.dataset) / "times.txt"
        gt_times = load_times(times_file) if times_file.exists() else None
    if gt_times is None or len(gt_times) != len(gt):
        log.warning("ground truth %s has no matching timestamps; skipping evaluation", path)
        return None, None
    return gt, np.asarray(gt_times, dtype=float)


def run(cfg: RunConfig, velocity_trace=None, ground_truth=None, gt_times=None,
        write: bool = True) -> tuple[MapGraph, RunLogs]:
    """Build a cognitive map from a stereo sequence or a velocity trace.

    With ``velocity_trace`` the VO stage is bypassed and scene labels in the
    trace stand in for camera views. Outputs go to ``cfg.output`` when
    ``write`` is set.
    """
    if velocity_trace is not None:
        rows = read_trace(velocity_trace)
        fov = cfg.intrinsics.horizontal_fov if cfg.intrinsics else math.radians(90.0)
        mapper = CognitiveMapper(cfg, fov)
        logs = mapper.logs
        for _ in mapper_stage(trace_stage(rows, cfg, logs), mapper):
            pass
        if gt_times is None:
            gt_times = [r[0] for r in rows]
        if ground_truth is None and (Path(velocity_trace).parent / "poses.txt").exists():
            ground_truth = Path(velocity_trace).parent / "poses.txt"
    else:
        if cfg.dataset is None:
            raise ValueError("a dataset directory or a velocity trace is required")
        frames = load_stereo_sequence(cfg.dataset)
        if not frames:
            mapper = CognitiveMapper(cfg, math.radians(90.0))
            logs = mapper.logs
        else:
            if cfg.intrinsics is not None:
                k = cfg.intrinsics
            else:
                calib = Path(cfg.dataset) / "calib.txt"
                if not calib.exists():
                    raise FileNotFoundError(f"{calib} not found and no intrinsics configured")
                k = intrinsics_for(calib, frames[0].load()[0].shape)
            vo = StereoVO(k, cfg.vo)
            mapper = CognitiveMapper(cfg, k.horizontal_fov)
            logs = mapper.logs
            for _ in mapper_stage(vo_stage(iter_stereo(frames), vo, cfg, logs), mapper):
                pass
    mapper.finish()
    graph = mapper.graph
    logs.stats = _stats(cfg, graph, logs, ground_truth, gt_times)
    if write:
        export_run(cfg.output, graph, logs)
    return graph, logs


def _stats(cfg, graph, logs, gt_path, gt_times) -> dict:
    stats = {
        "frames": len(logs.keyframes),
        "keyframes": sum(r.is_keyframe for r in logs.keyframes),
        "tracking_lost": sum(r.tracking_lost for r in logs.keyframes),
        "cycles": len(logs.phases),
        "experiences": len(graph.experiences),
        "links": len(graph.links),
        "loop_closures": len(logs.loop_closures),
        "templates": len(logs.templates),
        "seed": cfg.seed,
    }
    if graph.experiences:
        p = graph.poses()
        stats["endpoint_to_start"] = float(math.hypot(*(p[-1, :2] - p[0, :2])))
    gt, times = _ground_truth(cfg, gt_path, gt_times)
    if gt is not None and graph.experiences:
        ev = evaluate(graph, gt, times)
        stats["anchored"] = ev.anchored.as_dict()
        stats["fitted"] = ev.fitted.as_dict()
        stats["reference_kitti_00"] = dict(REFERENCE_KITTI_00)
    return stats
