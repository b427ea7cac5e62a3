"""Fit a ladder of SARIMAX orders and print AIC, SBC, LL, VAR and WN per row.

    python scripts/information_criteria_table.py data/consumption.csv data/temperature.csv
"""

import argparse
import logging

from loadsarimax.cli import Config, ingest
from loadsarimax.sarima import SarimaxOrder, fit_sarimax
from loadsarimax.series import log_transform

ORDERS = ["1,0,0,1,0,1,1", "3,0,0,1,0,1,1", "5,0,0,1,0,1,1", "3,0,2,1,0,1,1",
          "3,0,2,2,0,1,1", "3,0,2,3,0,1,1", "2,1,2,2,0,1,1", "1,0,1,2,1,1,1"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("consumption")
    ap.add_argument("temperature")
    ap.add_argument("--season", type=int, default=24)
    ap.add_argument("--order", action="append", help="p,d,q,r,P,D,Q (repeatable)")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    c, u, _ = ingest(args.consumption, args.temperature, Config())
    y = log_transform(c)
    print(f"{'model':28s} {'AIC':>10s} {'SBC':>10s} {'LL':>9s} {'VAR':>9s}  WN")
    for text in args.order or ORDERS:
        order = SarimaxOrder.parse(f"{text},{args.season}")
        _, rep, _ = fit_sarimax(y, u, order)
        print(f"{str(order):28s} {rep.aic:10.1f} {rep.sbc:10.1f} {rep.loglik:9.1f} "
              f"{rep.var:9.5f}  {'yes' if rep.wn else 'no'}")


if __name__ == "__main__":
    main()
