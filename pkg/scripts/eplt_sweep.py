"""Entanglement kept by the EPLT families as ε runs from 0 to ε*.

For a pair of qubit thermal states, applies both families to Ψ+ and prints CSV rows with
the singlet fraction, the negativity and whether the local-thermalization check passes.
"""
import argparse
import csv
import sys

import numpy as np

from preserva import eplt
from preserva import linalg as la
from preserva.divergences import singlet_fraction


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pa", type=float, default=0.6, help="ground population of γ_A")
    ap.add_argument("--pb", type=float, default=0.7, help="ground population of γ_B")
    ap.add_argument("--points", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    ga, gb = np.diag([args.pa, 1 - args.pa]), np.diag([args.pb, 1 - args.pb])
    params = eplt.eplt_params(ga, gb)
    psi = la.projector(la.max_entangled(2))
    out = csv.writer(sys.stdout)
    out.writerow(["family", "eps", "singlet_fraction", "negativity", "locally_thermalizing"])
    for eps in np.linspace(0.0, params.eps_star, args.points):
        for fam in ("W", "E"):
            ch = eplt.build_eplt(ga, gb, float(eps), fam)
            rho = ch(psi)
            ok = eplt.verify_local_thermalization(ch, ga, gb, seed=args.seed)
            out.writerow([fam, f"{eps:.6f}", f"{singlet_fraction(rho):.6f}",
                          f"{eplt.negativity(rho):.6f}", ok])


if __name__ == "__main__":
    main()
