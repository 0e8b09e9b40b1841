"""KS distance of normalized record counts to the limit law along a grid of ball counts.

    python3 scripts/limit_trend.py --grid 1024,16384,262144 --reps 2000 --out trend.json
"""
import argparse
import math

import numpy as np

from splitrec.constants import bst_constants
from splitrec.models import bst_params
from splitrec.stats import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--grid", default="1024,16384,262144")
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--targets", default="records_v,records_e")
    ap.add_argument("--out", help="write the full JSON report here")
    args = ap.parse_args()

    grid = tuple(int(x) for x in args.grid.split(","))
    cfg = ExperimentConfig(
        bst_params(), grid, args.reps, args.seed, tuple(args.targets.split(",")), constants=bst_constants()
    )
    rep = run_experiment(cfg, progress=lambda n, r: print(f"  n={n} done ({r} replicates)"))
    for target in cfg.targets:
        print(target)
        for n in grid:
            x = rep.samples[(n, target)]
            lead = np.mean(x) * 2 * math.log(n) / n - 1
            print(f"  n={n:>8}  KS={rep.ks_limit[(n, target)]:.4f}  mean*2ln(n)/n - 1 = {lead:+.4f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rep.to_json())


if __name__ == "__main__":
    main()
