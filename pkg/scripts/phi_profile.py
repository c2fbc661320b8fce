"""Print rho_k = Phi_[k](K) / sqrt(n/k) for the cube and cross-polytope over a (n, k) grid.

    python3 scripts/phi_profile.py [--m 2000] [--n 6 10 16]
"""

import argparse
import math

from quermass import bodies, functionals


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--n", type=int, nargs="*", default=[6, 10])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'body':<6} {'n':>3} {'k':>3} {'Phi':>9} {'stderr':>9} {'rho':>7} {'rho/log n':>9}")
    for kind in ("cube", "cross"):
        for n in args.n:
            K = bodies.body_from_config({"kind": kind, "dim": n})
            for k in range(1, min(n, 5) + 1):
                e = functionals.phi_k(K, k, args.m, rng=args.seed)
                rho = e.value / math.sqrt(n / k)
                print(f"{kind:<6} {n:>3} {k:>3} {e.value:9.4f} {e.stderr:9.4f} {rho:7.3f} {rho / math.log(n):9.3f}")


if __name__ == "__main__":
    main()
