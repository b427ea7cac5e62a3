"""Write a synthetic hourly load curve and a 3-hourly temperature file.

    python scripts/simulate_dataset.py --days 180 --seed 3 --out data/
"""

import argparse
from pathlib import Path

from loadsarimax.cli import write_table
from loadsarimax.sarima import SarimaxOrder
from loadsarimax.simulate import simulate_load


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--days", type=int, default=180)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--order", default="3,0,2,1,0,1,1,24")
    ap.add_argument("--out", type=Path, default=Path("data"))
    args = ap.parse_args()

    order = SarimaxOrder.parse(args.order)
    n = 24 * args.days
    # a persistent AR part and a strong seasonal MA, as seen on real load curves
    a = [0.6, 0.2, 0.1][: order.p]
    b = [0.1, -0.3][: order.q]
    exog = [7.5, 0.03, -0.01, 0.005][: order.r + 1]
    d = simulate_load(order, n + 1, exog, a=a, b=b, beta=[0.8] * order.Q,
                      alpha=[0.3] * order.P, sigma2=0.01, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    c, u = d.consumption.slice(0, n), d.temperature
    write_table(args.out / "consumption.csv", ["time", "consumption"], zip(c.times(), c.values))
    write_table(args.out / "temperature.csv", ["time", "temperature"],
                [(u.time_at(i), u.values[i]) for i in range(0, len(u), 3)])
    print(f"{n} hourly values of {order} in {args.out}/")


if __name__ == "__main__":
    main()
