"""Tabulate the contraction coefficient's infimum for ``f = a Y(t - lag)``.

A delayed linear driver with slope ``a`` needs ``L >= a^2``. For each ``a``
this prints ``inf kappa`` over ``beta > epsilon > 0`` at that ``L`` and the
smallest admissible threshold constant; the contraction check needs it
below 1/2.

Usage: python3 scripts/contraction_scan.py [--lag -0.25] [--alpha 1e-4] [--T 1]
"""
import argparse

import numpy as np

from rbdsde.conditions import kappa_lower_bound
from rbdsde.delay_measure import DelayMeasure


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lag", type=float, default=-0.25)
    p.add_argument("--alpha", type=float, default=1e-4)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--C-hat", type=float, default=1e-12)
    args = p.parse_args(argv)
    m = DelayMeasure.point_mass(args.lag, args.T)
    print("a,L,inf_kappa,contracts")
    for a in (float(x) for x in np.round(np.arange(0.025, 0.301, 0.025), 3)):
        L = round(a * a, 12)
        k = kappa_lower_bound(L, args.alpha, args.T, m, C_hat=args.C_hat)
        print(f"{a},{L!r},{k:.6g},{k < 0.5}")


if __name__ == "__main__":
    main()
