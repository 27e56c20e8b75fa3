"""Equilibrium price as the generator's output grows relative to load.

Writes overcapacity.csv with columns scale,price,quantity,status,mean_spot.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from eqforward.equilibrium import risk_neutral_price, solve_equilibrium
from eqforward.fixtures import skewed_market


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", type=int, default=200)
    ap.add_argument("--lam", type=float, default=0.5, help="lambda of both agents")
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for scale in np.round(np.arange(1.0, 1.31, 0.05), 2):
        cfg = skewed_market(args.scenarios, gen_scale=scale, lam_gen=args.lam, lam_load=args.lam, alpha=args.alpha)
        res = solve_equilibrium(cfg)
        rows.append((scale, res.price, res.quantity, res.status.value, risk_neutral_price(cfg)))
        print(f"scale {scale:.2f}: price {res.price:8.3f}  quantity {res.quantity:8.3f}  {res.status.value}")
    with open(out / "overcapacity.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scale", "price", "quantity", "status", "mean_spot"])
        for scale, p, q, st, m in rows:
            w.writerow([f"{scale:.12g}", f"{p:.12g}", f"{q:.12g}", st, f"{m:.12g}"])


if __name__ == "__main__":
    main()
