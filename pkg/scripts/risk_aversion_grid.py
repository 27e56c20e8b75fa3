"""Equilibrium price over a grid of generator and load risk weights.

Writes risk_grid.csv with columns lam_gen,lam_load,price,quantity,status.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from eqforward.equilibrium import solve_equilibrium
from eqforward.fixtures import skewed_market


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", type=int, default=200)
    ap.add_argument("--steps", type=int, default=5)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lams = np.linspace(0.0, 1.0, args.steps)
    with open(out / "risk_grid.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lam_gen", "lam_load", "price", "quantity", "status"])
        for lg in lams:
            line = []
            for ld in lams:
                res = solve_equilibrium(skewed_market(args.scenarios, lam_gen=lg, lam_load=ld, alpha=args.alpha))
                w.writerow([f"{lg:.12g}", f"{ld:.12g}", f"{res.price:.12g}", f"{res.quantity:.12g}",
                            res.status.value])
                line.append(f"{res.price:7.2f}")
            print(f"lam_gen {lg:.2f}: " + " ".join(line))


if __name__ == "__main__":
    main()
