"""Velocity-trace run on the 4x25 m square with one revisit cue.

    python3 scripts/square_demo.py --out runs/square [--noise 0.02] [--seed 0]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

from neuroslam.pipeline.config import RunConfig
from neuroslam.pipeline.run import run
from neuroslam.pipeline.synth import TrajectorySpec, synthesize_world


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/square")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, default=0.0,
                    help="relative speed noise; heading noise is half of it in rad/s")
    args = ap.parse_args()
    out = Path(args.out)
    spec = TrajectorySpec(velocity_noise=args.noise, heading_noise=args.noise / 2)
    synthesize_world(spec, args.seed, out / "world")
    cfg = RunConfig(output=out / "map", seed=args.seed)
    graph, logs = run(cfg, velocity_trace=out / "world" / "trace.csv")
    path_length = 100.0
    s = logs.stats
    print(json.dumps(s, indent=2, sort_keys=True))
    print(f"endpoint-to-start {s['endpoint_to_start']:.4f} m "
          f"({100 * s['endpoint_to_start'] / path_length:.3f}% of path)")


if __name__ == "__main__":
    main()
