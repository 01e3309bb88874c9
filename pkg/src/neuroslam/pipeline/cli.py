"""Command-line entry point: ``neuroslam {run,evaluate,synth,ratemap}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..attractor import AttractorConfig
from ..experience_map import load_experiences_csv
from .config import ConfigError, RunConfig, _parse_scalar, load_config
from .evaluate import REFERENCE_KITTI_00, evaluate
from .io import DatasetError, load_ground_truth, load_times
from .ratemap import firing_rate_map, write_pgm, write_rate_csv
from .run import read_phase_log, run
from .synth import PhotometricSpec, TrajectorySpec, synthesize_world


def parse_spec_text(text: str):
    """World spec as ``key = value`` lines; ``kind`` selects photometric or trajectory.

    Waypoints are written ``x,y; x,y; ...``.
    """
    vals: dict = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        vals[key.strip()] = val.strip()
    kind = vals.pop("kind", "trajectory")
    cls = {"photometric": PhotometricSpec, "trajectory": TrajectorySpec}.get(kind)
    if cls is None:
        raise ConfigError(f"unknown world kind {kind!r}")
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in vals.items():
        if key not in names:
            raise ConfigError(f"unknown {kind} spec key {key!r}")
        if key == "waypoints":
            try:
                kwargs[key] = [tuple(float(c) for c in p.split(",")) for p in val.split(";")
                               if p.strip()]
            except ValueError:
                raise ConfigError(f"malformed waypoints {val!r}") from None
        else:
            kwargs[key] = _parse_scalar(val)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _parse_unit(text: str):
    kind, _, rest = text.partition(":")
    try:
        if kind == "hd":
            return "hd", float(rest)
        if kind == "grid":
            px, py = (float(v) for v in rest.split(","))
            return "grid", (px, py)
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"unit must be hd:<phase> or grid:<px>,<py>, got {text!r}")


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    updates = {}
    if args.dataset is not None:
        updates["dataset"] = Path(args.dataset)
    if args.out is not None:
        updates["output"] = Path(args.out)
    if args.seed is not None:
        updates["seed"] = args.seed
    cfg = dataclasses.replace(cfg, **updates)
    graph, logs = run(cfg, velocity_trace=args.velocity_trace, ground_truth=args.gt)
    print(json.dumps(logs.stats, indent=2, sort_keys=True))
    print(f"wrote {len(graph.experiences)} experiences to {cfg.output}")
    return 0


def cmd_evaluate(args) -> int:
    graph = load_experiences_csv(args.map)
    gt = load_ground_truth(args.gt)
    if args.times:
        times = load_times(args.times)
    elif args.rate:
        times = np.arange(len(gt)) / args.rate
    elif (Path(args.gt).parent / "times.txt").exists():
        times = load_times(Path(args.gt).parent / "times.txt")
    else:
        times = np.arange(len(gt)) / 10.0
    ev = evaluate(graph, gt, times)
    out = {"anchored": ev.anchored.as_dict(), "fitted": ev.fitted.as_dict(),
           "reference_kitti_00": REFERENCE_KITTI_00}
    print(json.dumps(out, indent=2))
    return 0


def cmd_synth(args) -> int:
    spec = parse_spec_text(Path(args.spec).read_text()) if args.spec else TrajectorySpec()
    synthesize_world(spec, args.seed, args.out)
    print(f"wrote {type(spec).__name__} world to {args.out}")
    return 0


def cmd_ratemap(args) -> int:
    kind, pref = args.unit
    xy, hd, grid = read_phase_log(args.phase_log)
    phases = hd if kind == "hd" else grid
    rm = firing_rate_map(xy, phases, pref, args.sigma, args.bin_size, args.min_occupancy)
    write_pgm(rm, args.out)
    write_rate_csv(rm, Path(args.out).with_suffix(".csv"))
    print(f"wrote {rm.rates.shape[1]}x{rm.rates.shape[0]} rate map to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neuroslam", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="build a cognitive map")
    r.add_argument("--config", help="flat key = value config file")
    r.add_argument("--dataset", help="stereo sequence directory (image_0/, image_1/, times.txt)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--velocity-trace", help="CSV of t,omega,v,scene; bypasses visual odometry")
    r.add_argument("--gt", help="ground-truth pose file for evaluation")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="compare a map against ground truth")
    e.add_argument("--map", required=True, help="experiences CSV")
    e.add_argument("--gt", required=True, help="ground-truth pose file")
    g = e.add_mutually_exclusive_group()
    g.add_argument("--times", help="ground-truth timestamps, one per line")
    g.add_argument("--rate", type=float, help="ground-truth rate in Hz when no times file exists")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("synth", help="generate a synthetic world")
    s.add_argument("--spec", help="world spec file (default: 4x25 m square trace)")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("ratemap", help="firing-rate map of one model unit")
    m.add_argument("--phase-log", required=True)
    m.add_argument("--unit", required=True, type=_parse_unit, help="hd:<phase> or grid:<px>,<py>")
    m.add_argument("--out", required=True, help="PGM path; bin values go to a sibling .csv")
    m.add_argument("--bin-size", type=float, default=1.0)
    m.add_argument("--sigma", type=float, default=0.5, help="tuning width in rad")
    m.add_argument("--min-occupancy", type=int, default=1)
    m.set_defaults(func=cmd_ratemap)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
