"""Trace of the active dimension and samples per iteration for one ASEBO run.

Shows how many directions are needed once the gradient history concentrates
in a low-dimensional subspace.

    python scripts/active_dimension_trace.py --function sphere --dim 100 --iters 300
"""
import argparse

import numpy as np

from asebo import AseboConfig, asebo_optimize, initial_point, make_function


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--function", default="sphere")
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--iters", type=int, default=300)
    ap.add_argument("--threshold", type=float, default=0.995)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write the full telemetry here")
    args = ap.parse_args()

    cfg = AseboConfig(total_iters=args.iters, pca_threshold=args.threshold, seed=args.seed)
    _, rec = asebo_optimize(make_function(args.function, args.dim), initial_point(args.dim), cfg)
    if args.csv:
        rec.write_csv(args.csv)
    stride = max(1, len(rec.rows) // 20)
    print(f"{'iter':>5} {'queries':>8} {'n_t':>4} {'r':>4} {'p_t':>6} {'best':>12}")
    for r in rec.rows[::stride]:
        p = "" if r.p_t is None else f"{r.p_t:.3f}"
        act = "" if r.active_dim is None else r.active_dim
        print(f"{r.iteration:>5} {r.queries:>8} {r.n_t:>4} {act:>4} {p:>6} {r.best_value:>12.5g}")
    dims = np.array([r.active_dim for r in rec.rows if r.active_dim is not None])
    print(f"median active dimension {np.median(dims):g} of {args.dim}")


if __name__ == "__main__":
    main()
