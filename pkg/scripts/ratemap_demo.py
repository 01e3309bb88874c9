"""Straight out-and-back run and rate maps of one HD unit and one grid unit.

    python3 scripts/ratemap_demo.py --out runs/ratemap [--length 200]
"""
from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from neuroslam.attractor import AttractorConfig
from neuroslam.pipeline.config import RunConfig
from neuroslam.pipeline.ratemap import (firing_rate_map, local_maxima_1d, write_pgm,
                                        write_rate_csv)
from neuroslam.pipeline.run import read_phase_log, run
from neuroslam.pipeline.synth import TrajectorySpec, synthesize_world


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/ratemap")
    ap.add_argument("--length", type=float, default=200.0)
    ap.add_argument("--bin-size", type=float, default=1.0)
    args = ap.parse_args()
    out = Path(args.out)
    spec = TrajectorySpec(waypoints=[(0.0, 0.0), (args.length, 0.0), (0.0, 0.0)],
                          revisit_cue=False)
    synthesize_world(spec, 0, out / "world")
    cfg = RunConfig(output=out / "map")
    run(cfg, velocity_trace=out / "world" / "trace.csv")
    xy, hd, grid = read_phase_log(out / "map" / "phases.csv")

    hd_map = firing_rate_map(xy, hd, 0.0, 0.3, args.bin_size)
    write_pgm(hd_map, out / "hd_east.pgm")
    write_rate_csv(hd_map, out / "hd_east.csv")

    grid_map = firing_rate_map(xy, grid, (0.0, 0.0), 0.5, args.bin_size)
    write_pgm(grid_map, out / "grid_00.pgm")
    write_rate_csv(grid_map, out / "grid_00.csv")
    row = np.nan_to_num(np.nanmax(grid_map.rates, axis=0))
    peaks = grid_map.bin_centers()[0][local_maxima_1d(row)]
    period = 2 * math.pi / AttractorConfig().grid_gain
    print(f"grid field centres (m): {np.round(peaks, 2).tolist()}")
    print(f"spacing {np.diff(peaks).round(2).tolist()} vs expected {period:.2f}")


if __name__ == "__main__":
    main()
