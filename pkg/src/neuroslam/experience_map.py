"""Semi-metric topological map of experiences with robust pose-graph relaxation."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import wrap_pi

log = logging.getLogger(__name__)


@dataclass
class Experience:
    id: int
    x: float
    y: float
    theta: float
    template_id: int = -1
    hd_phase: float = 0.0
    grid_phase: tuple[float, float] = (0.0, 0.0)
    timestamp: float = 0.0


@dataclass(frozen=True)
class ExperienceLink:
    from_id: int
    to_id: int
    d: float
    heading_rad: float
    facing_rad: float
    dt: float = 0.0
    loop_closure: bool = False

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError("a link must join two distinct experiences")
        if not self.d >= 0:
            raise ValueError("link distance must be non-negative")


@dataclass(frozen=True)
class OptimizeResult:
    converged: bool
    iterations: int
    initial_cost: float
    final_cost: float


@dataclass
class MapGraph:
    experiences: list[Experience] = field(default_factory=list)
    links: list[ExperienceLink] = field(default_factory=list)
    robust_delta: float = 1.0
    angle_scale: float = 1.0

    def poses(self) -> np.ndarray:
        return np.array([[e.x, e.y, e.theta] for e in self.experiences]).reshape(-1, 3)

    def set_poses(self, poses: np.ndarray) -> None:
        for e, (x, y, th) in zip(self.experiences, poses):
            e.x, e.y, e.theta = float(x), float(y), wrap_pi(th)


def add_experience(graph: MapGraph, pose: tuple[float, float, float], template_id: int = -1,
                   hd_phase: float = 0.0, grid_phase: tuple[float, float] = (0.0, 0.0),
                   prev_id: int | None = None, timestamp: float = 0.0):
    """Append an experience at an odometric pose and link it from ``prev_id``.

    Returns ``(experience, link)``; ``link`` is None for the root.
    """
    x, y, th = float(pose[0]), float(pose[1]), wrap_pi(pose[2])
    if graph.experiences and prev_id is None:
        raise ValueError("prev_id is required once the map has a root")
    exp = Experience(len(graph.experiences), x, y, th, template_id, hd_phase,
                     (float(grid_phase[0]), float(grid_phase[1])), timestamp)
    link = None
    if prev_id is not None:
        prev = graph.experiences[prev_id]
        dx, dy = x - prev.x, y - prev.y
        d = math.hypot(dx, dy)
        heading = wrap_pi(math.atan2(dy, dx) - prev.theta) if d > 0 else 0.0
        link = ExperienceLink(prev_id, exp.id, d, heading, wrap_pi(th - prev.theta),
                              timestamp - prev.timestamp)
        graph.links.append(link)
    graph.experiences.append(exp)
    return exp, link


def close_loop(graph: MapGraph, current_id: int, matched_id: int,
               relative_facing: float = 0.0) -> ExperienceLink | None:
    """Add a zero-distance link to a revisited experience.

    An identical loop link already present is not duplicated; None is returned.
    """
    n = len(graph.experiences)
    if not (0 <= current_id < n and 0 <= matched_id < n):
        raise IndexError("loop closure endpoints must exist")
    link = ExperienceLink(matched_id, current_id, 0.0, 0.0, wrap_pi(relative_facing),
                          loop_closure=True)
    for other in graph.links:
        if (other.loop_closure and other.from_id == link.from_id
                and other.to_id == link.to_id and other.facing_rad == link.facing_rad):
            return None
    graph.links.append(link)
    return link


def residual(e_i: Experience, e_j: Experience, link: ExperienceLink) -> np.ndarray:
    a = e_i.theta + link.heading_rad
    return np.array([
        e_j.x - e_i.x - link.d * math.cos(a),
        e_j.y - e_i.y - link.d * math.sin(a),
        wrap_pi(e_j.theta - e_i.theta - link.facing_rad),
    ])


def _link_arrays(graph: MapGraph):
    L = graph.links
    src = np.array([l.from_id for l in L], dtype=int)
    dst = np.array([l.to_id for l in L], dtype=int)
    d = np.array([l.d for l in L])
    head = np.array([l.heading_rad for l in L])
    face = np.array([l.facing_rad for l in L])
    return src, dst, d, head, face


def _residuals(poses, src, dst, d, head, face, angle_scale):
    a = poses[src, 2] + head
    r = np.empty((len(src), 3))
    r[:, 0] = poses[dst, 0] - poses[src, 0] - d * np.cos(a)
    r[:, 1] = poses[dst, 1] - poses[src, 1] - d * np.sin(a)
    r[:, 2] = angle_scale * wrap_pi(poses[dst, 2] - poses[src, 2] - face)
    return r


def huber_rho(s: np.ndarray, delta: float) -> np.ndarray:
    """Huber loss applied to a squared norm ``s``."""
    d2 = delta * delta
    return np.where(s <= d2, s, 2.0 * delta * np.sqrt(s) - d2)


def huber_weight(s: np.ndarray, delta: float) -> np.ndarray:
    return np.where(s <= delta * delta, 1.0, delta / np.sqrt(np.maximum(s, 1e-300)))


def robust_cost(graph: MapGraph, poses: np.ndarray | None = None) -> float:
    if not graph.links:
        return 0.0
    p = graph.poses() if poses is None else poses
    r = _residuals(p, *_link_arrays(graph), graph.angle_scale)
    return 0.5 * float(np.sum(huber_rho(np.sum(r * r, axis=1), graph.robust_delta)))


def _jacobian(poses, src, dst, d, head, n_free):
    """Sparse Jacobian w.r.t. the poses of experiences 1..n-1."""
    m = len(src)
    a = poses[src, 2] + head
    rows, cols, vals = [], [], []

    def put(r_idx, node, comp, v):
        keep = node > 0
        rows.append(r_idx[keep])
        cols.append(3 * (node[keep] - 1) + comp)
        vals.append(np.broadcast_to(v, node.shape)[keep])

    rx, ry, rt = 3 * np.arange(m), 3 * np.arange(m) + 1, 3 * np.arange(m) + 2
    put(rx, dst, 0, 1.0)
    put(rx, src, 0, -1.0)
    put(rx, src, 2, d * np.sin(a))
    put(ry, dst, 1, 1.0)
    put(ry, src, 1, -1.0)
    put(ry, src, 2, -d * np.cos(a))
    put(rt, dst, 2, 1.0)
    put(rt, src, 2, -1.0)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * m, 3 * n_free),
    )


def optimize(graph: MapGraph, max_iterations: int = 100, tol: float = 1e-9) -> OptimizeResult:
    """Minimise half the summed Huber cost by damped, reweighted Gauss-Newton.

    Experience 0 is the gauge and is never modified.
    """
    n = len(graph.experiences)
    if n < 2 or not graph.links:
        c = robust_cost(graph)
        return OptimizeResult(True, 0, c, c)
    src, dst, d, head, face = _link_arrays(graph)
    scale = graph.angle_scale
    poses = graph.poses()
    cost = robust_cost(graph, poses)
    initial = cost
    lam = 1e-6
    converged = False
    it = 0
    scale_rows = np.tile(np.array([1.0, 1.0, scale]), len(src))
    for it in range(1, max_iterations + 1):
        r = _residuals(poses, src, dst, d, head, face, scale)
        w = huber_weight(np.sum(r * r, axis=1), graph.robust_delta)
        J = _jacobian(poses, src, dst, d, head, n - 1)
        J = sp.diags(scale_rows) @ J
        W = sp.diags(np.repeat(w, 3))
        H = (J.T @ W @ J).tocsc()
        g = J.T @ (W @ r.ravel())
        diag = H.diagonal()
        diag = np.where(diag > 0, diag, 1.0)
        accepted = False
        for _ in range(9):
            A = (H + sp.diags(lam * diag)).tocsc()
            try:
                with np.errstate(all="ignore"):
                    step = spla.spsolve(A, -g)
            except (RuntimeError, np.linalg.LinAlgError):
                step = None
            if step is None or not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            trial = poses.copy()
            trial[1:] += step.reshape(-1, 3)
            trial[1:, 2] = wrap_pi(trial[1:, 2])
            new_cost = robust_cost(graph, trial)
            if new_cost <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            log.debug("pose graph: no descent after damping, stopping at iteration %d", it)
            break
        decrease = cost - new_cost
        poses, cost = trial, new_cost
        lam = max(lam / 10.0, 1e-12)
        if decrease <= tol * max(cost, 1e-300) or cost == 0.0:
            converged = True
            break
    if cost == 0.0 or it == 0:
        converged = True
    for e, (x, y, th) in zip(graph.experiences[1:], poses[1:]):
        e.x, e.y, e.theta = float(x), float(y), wrap_pi(th)
    return OptimizeResult(converged, it, initial, cost)


def export_csv(graph: MapGraph, experiences_path, links_path) -> None:
    with open(Path(experiences_path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "theta", "template_id", "timestamp"])
        for e in graph.experiences:
            w.writerow([e.id, repr(e.x), repr(e.y), repr(e.theta), e.template_id,
                        repr(e.timestamp)])
    with open(Path(links_path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "d", "heading_rad", "facing_rad"])
        for l in graph.links:
            w.writerow([l.from_id, l.to_id, repr(l.d), repr(l.heading_rad), repr(l.facing_rad)])


def export_json(graph: MapGraph, path) -> None:
    data = {
        "experiences": [asdict(e) for e in graph.experiences],
        "links": [asdict(l) for l in graph.links],
    }
    Path(path).write_text(json.dumps(data, indent=1))


def load_experiences_csv(path) -> MapGraph:
    graph = MapGraph()
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            graph.experiences.append(Experience(
                int(row["id"]), float(row["x"]), float(row["y"]), float(row["theta"]),
                int(row["template_id"]), timestamp=float(row["timestamp"]),
            ))
    return graph
