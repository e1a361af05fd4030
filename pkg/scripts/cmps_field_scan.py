#!/usr/bin/env python3
"""Scan the local normal density of a random cMPS across field families.

For each built-in 1-d field, evaluates the closed-form normal density and
the boosted-momentum ratio on a grid and prints the worst disagreement.
"""

import argparse

import numpy as np

from sfdist import cmps
from sfdist.domain import VelocityField


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bond-dim", type=int, default=3)
    ap.add_argument("--length", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()

    state = cmps.CMPS.random_fourier(args.length, args.bond_dim,
                                     seed=args.seed, real=True)
    fields = {
        "constant": VelocityField("constant", params=(0.3,)),
        "linear": VelocityField("linear", params=(0.4,)),
        "inverse_power": VelocityField("inverse_power", params=(0.8,),
                                       exclusion_radius=0.1),
    }
    step = args.length / args.points
    xs = state.x_left + (np.arange(args.points) + 0.5) * step
    for name, vf in fields.items():
        worst = 0.0
        for x in xs:
            xv = np.array([x])
            if vf.is_singular(xv) or float(vf.eval(xv)[0]) == 0.0:
                continue
            rho, rho_n = cmps.normal_fluid_1d(state, vf, 1.0, float(x),
                                              check_intrinsic=False)
            via = cmps.momentum_density_lgt(state, vf, 1.0, float(x),
                                            check_intrinsic=False)
            v = float(vf.eval(xv)[0])
            worst = max(worst, abs(via / v - rho_n))
            print(f"{name:14s} x={x:+.3f}  rho={rho:.6f}  rho_n={rho_n:+.6f}")
        print(f"{name:14s} worst route disagreement: {worst:.3e}\n")


if __name__ == "__main__":
    main()
