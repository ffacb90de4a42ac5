"""Exhaustive lemma checks over several desk instances, including rho at the boundary."""

import argparse
from fractions import Fraction

from robust_auction.oracle import (
    desk_instance,
    verify_border_dominance,
    verify_delta_positive,
    verify_good_persistence,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=8)
    ap.add_argument("--kmax", type=int, default=3)
    args = ap.parse_args()

    print("grid,epsilon,rho,persistence_violations,border_violations,delta_violations,cases")
    for grid in (3, 5, 9):
        for eps in ("0.25", "0.5", "0.75"):
            e = Fraction(eps)
            for rho in (e / (2 - e) / 2, e / (2 - e)):
                mech, dist = desk_instance(grid, args.T, e, rho)
                if (mech.params.threshold / dist.tick).denominator != 1:
                    continue
                reps = [verify_good_persistence(mech, dist, args.kmax)]
                border = delta = 0
                for k in range(1, args.kmax + 1):
                    for t in range(1, args.T):
                        b = verify_border_dominance(mech, dist, k, t)
                        d = verify_delta_positive(mech, dist, k, t)
                        border += len(b.violations)
                        delta += len(d.violations)
                        reps += [b, d]
                cases = sum(r.cases for r in reps)
                print(f"{grid},{eps},{rho},{len(reps[0].violations)},{border},{delta},{cases}")


if __name__ == "__main__":
    main()
