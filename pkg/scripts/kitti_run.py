"""Full pipeline on a KITTI odometry sequence.

    KITTI_ROOT=/data/kitti python3 scripts/kitti_run.py --sequence 00 --out runs/kitti00

Expects ``$KITTI_ROOT/sequences/<seq>/{image_0,image_1,times.txt,calib.txt}``
and, for evaluation, ``$KITTI_ROOT/poses/<seq>.txt``.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
from pathlib import Path

from neuroslam.pipeline.config import RunConfig, load_config
from neuroslam.pipeline.run import run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", default=os.environ.get("KITTI_ROOT"))
    ap.add_argument("--sequence", default="00")
    ap.add_argument("--out", default="runs/kitti")
    ap.add_argument("--config", help="optional key = value config overriding the defaults")
    ap.add_argument("--max-frames", type=int)
    args = ap.parse_args()
    if not args.root:
        ap.error("set KITTI_ROOT or pass --root")
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    root = Path(args.root)
    seq = root / "sequences" / args.sequence
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = dataclasses.replace(cfg, dataset=seq, output=Path(args.out), max_frames=args.max_frames)
    gt = root / "poses" / f"{args.sequence}.txt"
    _, logs = run(cfg, ground_truth=gt if gt.exists() else None)
    print(json.dumps(logs.stats, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
