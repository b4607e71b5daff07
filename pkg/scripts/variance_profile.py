"""Monte-Carlo variance of the hybrid estimator against the closed form over p.

Prints one row per p with the closed-form value, the MC estimate and its
standard error, plus the isotropic baseline and the optimal p.

    python scripts/variance_profile.py --dim 20 --active 5 --share 0.8
"""
import argparse

import numpy as np

from asebo import theory as th
from asebo.verify import coordinate_subspace, split_linear


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--active", type=int, default=5)
    ap.add_argument("--share", type=float, default=0.8, help="fraction of ||grad||^2 in the active subspace")
    ap.add_argument("--draws", type=int, default=200_000)
    args = ap.parse_args()

    f, split = split_linear(args.dim, args.active, args.share)
    sub = coordinate_subspace(args.dim, args.active)
    theta = np.zeros(args.dim)
    print(f"baseline {th.baseline_variance(split):.4f}, optimal p {th.optimal_p(split):.4f}, "
          f"optimal variance {th.optimal_variance(split):.4f}, slack {th.variance_slack(split):.4f}")
    print(f"{'p':>5} {'gamma':>10} {'MC':>10} {'stderr':>8}")
    for i, p in enumerate(np.arange(1, 10) / 10):
        res = th.mc_variance(None, args.draws, np.random.default_rng(i),
                             batch=th.hybrid_one_sample(f, theta, 0.01, sub.u_act, sub.u_perp, p))
        print(f"{p:>5.1f} {th.gamma_variance(split, p):>10.4f} {res.variance:>10.4f} {res.stderr:>8.4f}")


if __name__ == "__main__":
    main()
