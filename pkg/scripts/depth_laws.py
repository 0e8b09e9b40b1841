"""Last-ball depth diagnostics across a grid of ball counts.

    python3 scripts/depth_laws.py --model bst --grid 1000,10000,100000 --reps 10000
"""
import argparse
import math

from splitrec.constants import best_mu_sigma
from splitrec.models import parse_model
from splitrec.stats import depth_clt_check


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="bst")
    ap.add_argument("--grid", default="1000,10000,100000")
    ap.add_argument("--reps", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--method", choices=("spine", "full"), default="spine")
    args = ap.parse_args()

    params = parse_model(args.model)
    ms = best_mu_sigma(params.model)
    target = ms.sigma2 / ms.mu**3
    print(f"{params.model.name}: mu={ms.mu:.6g} sigma2={ms.sigma2:.6g} Var/ln n target={target:.4g}")
    print(f"{'n':>9} {'mean/ln n':>10} {'Var/ln n':>9} {'KS':>7}")
    for n in (int(x) for x in args.grid.split(",")):
        chk = depth_clt_check(params, n, args.reps, ms.mu, ms.sigma2, args.seed, args.method)
        print(f"{n:>9} {chk.mean / math.log(n):>10.4f} {chk.var_over_log:>9.4f} {chk.ks:>7.4f}")


if __name__ == "__main__":
    main()
