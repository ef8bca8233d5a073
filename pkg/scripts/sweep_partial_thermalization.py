"""Tabulate both preservability monotones along the partial thermalization line.

Prints CSV: lambda, p_bar_dmax, p_dmax, log2(1 + 3 lambda). The last column is the
qubit closed form for p_bar_dmax at γ = I/2.
"""
import argparse
import csv
import math
import sys

import numpy as np

from preserva import athermality as ath


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=11)
    ap.add_argument("--ground", type=float, default=0.5, help="ground-state population of γ")
    ap.add_argument("--restarts", type=int, default=8)
    args = ap.parse_args(argv)

    spec = ath.ThermalSpec.from_populations([args.ground, 1 - args.ground])
    out = csv.writer(sys.stdout)
    out.writerow(["lambda", "p_bar_dmax", "p_dmax", "closed_form_half"])
    for lam in np.linspace(0.0, 1.0, args.points):
        ch = ath.gibbs_channel("partial_thermalization", spec, float(lam))
        out.writerow([f"{lam:.4f}", f"{ath.p_bar_dmax(ch, spec):.10f}",
                      f"{ath.p_dmax(ch, spec, restarts=args.restarts):.10f}",
                      f"{math.log2(1 + 3 * lam):.10f}"])


if __name__ == "__main__":
    main()
