"""ASEBO vs vanilla ES on the benchmark suite at equal query budgets.

Defaults follow the d=1000 benchmark setting; use --dim 100 --budget 50000
for a desk-scale run. Writes one directory per (function, algorithm) under
--out and, with --plot, an overlay SVG per function.

    python scripts/benchmark_comparison.py --functions sphere,rosenbrock --dim 100 --budget 50000
"""
import argparse
import json
from pathlib import Path

from asebo.cli import ExperimentSpec, run_experiment


def overlay(out: Path, function: str, summaries: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "asebo"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for algo, summary in summaries.items():
        pts = [p for p in summary["checkpoints"] if p["median"] is not None]
        q = [p["queries"] for p in pts]
        ax.plot(q, [p["median"] for p in pts], label=algo)
        ax.fill_between(q, [p["q25"] for p in pts], [p["q75"] for p in pts], alpha=0.2)
    if all(p["q25"] and p["q25"] > 0 for s in summaries.values() for p in s["checkpoints"] if p["median"]):
        ax.set_yscale("log")
    ax.set_xlabel("queries")
    ax.set_ylabel("best value")
    ax.set_title(function)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / f"{function}.svg", format="svg", metadata={"Date": None})
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--functions", default="sphere,rastrigin,rosenbrock,lunacek")
    ap.add_argument("--dim", type=int, default=1000)
    ap.add_argument("--budget", type=int, default=200_000)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--out", default="runs/benchmarks")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    out = Path(args.out)
    seeds = [int(s) for s in args.seeds.split(",")]
    table = {}
    for fn in args.functions.split(","):
        summaries = {}
        for algo in ("asebo", "vanilla-es"):
            spec = ExperimentSpec(fn, args.dim, algo, args.budget, seeds, out=str(out / fn / algo))
            summaries[algo] = run_experiment(spec, jobs=args.jobs)
            table[(fn, algo)] = summaries[algo]["final"]["median_best_value"]
            print(f"{fn:>11} {algo:>10}: median best {table[(fn, algo)]:.6g}")
        if args.plot:
            overlay(out, fn, summaries)
    (out / "table.json").write_text(json.dumps({f"{k[0]}/{k[1]}": v for k, v in table.items()},
                                               indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
