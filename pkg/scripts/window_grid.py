"""Rolling C_R over regression dimension r and window length M for one order.

    python scripts/window_grid.py data/consumption.csv data/temperature.csv --jobs 4
"""

import argparse
import logging

import numpy as np

from loadsarimax.cli import Config, ingest
from loadsarimax.forecast import grid_search
from loadsarimax.sarima import SarimaxOrder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("consumption")
    ap.add_argument("temperature")
    ap.add_argument("--order", default="1,0,0,1,0,1,1,24")
    ap.add_argument("--r", default="1,2,3,4")
    ap.add_argument("--m", default="336,504,730,1000,1460")
    ap.add_argument("--days", type=int, default=14)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    c, u, _ = ingest(args.consumption, args.temperature, Config())
    order = SarimaxOrder.parse(args.order)
    rs = [int(v) for v in args.r.split(",")]
    ms = [int(v) for v in args.m.split(",")]
    grid = grid_search(c, u, [order], r_values=rs, m_values=ms, n=args.days, h=24,
                       n_jobs=args.jobs)
    mat = grid.cr_matrix(order)
    print("r \\ M " + "".join(f"{m:>9d}" for m in grid.m_values))
    for r, row in zip(grid.r_values, mat):
        print(f"{r:5d} " + "".join(f"{v:9.4f}" if np.isfinite(v) else f"{'failed':>9s}" for v in row))
    best = grid.best
    print(f"best: r={best.order.r} M={best.m} C_R={best.report.c_r:.4f}")


if __name__ == "__main__":
    main()
