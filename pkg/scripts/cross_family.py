"""Constants of several split-tree families side by side.

    python3 scripts/cross_family.py --models bst,mary:3,mary:4,trie:0.3,0.7 --grid 250,500,1000 --reps 2000
"""
import argparse
import math

from splitrec.constants import compute_constants, renewal_U
from splitrec.models import BinarySearchTree, PermutedFixed, Symmetric, parse_model


def _models(text):
    # "trie:0.3,0.7" contains commas; split on commas that start a new family name
    out, cur = [], ""
    for tok in text.split(","):
        if cur and tok[:1].isalpha():
            out.append(cur)
            cur = tok
        else:
            cur = f"{cur},{tok}" if cur else tok
    return out + [cur]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--models", default="bst,mary:3,mary:4,trie:0.3,0.7")
    ap.add_argument("--grid", default="250,500,1000")
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--t", type=float, default=8.0, help="renewal argument for e^-t U(t)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    grid = tuple(int(x) for x in args.grid.split(","))
    print(f"{'model':<14} {'mu':>8} {'sigma2':>8} {'alpha':>7} {'varsigma':>9} {'zeta':>8} {'C':>9} {'e^-tU*mu':>9}")
    for spec in _models(args.models):
        params = parse_model(spec)
        c = compute_constants(params, grid, args.reps, args.seed)
        analytic = isinstance(params.model, (BinarySearchTree, PermutedFixed, Symmetric))
        u = renewal_U(params.model, args.t, method="series_analytic" if analytic else "series_mc", rng=args.seed)
        ratio = math.exp(-args.t) * u.U * c.mu
        print(
            f"{spec:<14} {c.mu:>8.5f} {c.sigma2:>8.5f} {c.alpha:>7.4f} {c.varsigma:>9.4f} "
            f"{c.zeta:>8.4f} {c.C:>9.4f} {ratio:>9.4f}"
        )


if __name__ == "__main__":
    main()
