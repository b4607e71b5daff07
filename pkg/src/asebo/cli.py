"""Command-line experiment runner.

    asebo run --function sphere --dim 100 --algo asebo --budget 50000 --seeds 1,2,3,4,5
    asebo verify variance
    asebo plot runs/summary.json --out curve.svg

``run`` writes one CSV per seed and a ``summary.json`` with the median and
interquartile range of best_value at evenly spaced query checkpoints. Output
bytes depend only on the experiment spec.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .functions import FUNCTION_NAMES, initial_point, make_function
from .optimizer import (AseboConfig, BanditExplorer, CompressedSensingExplorer, Mode, RunRecord,
                        asebo_optimize, vanilla_es)
from .verify import SUITES, run_suites

log = logging.getLogger("asebo")

OUT_ENV = "ASEBO_OUT_DIR"
ALGOS = ("asebo", "vanilla-es")
# functions that need extra data are not addressable from the command line
CLI_FUNCTIONS = tuple(n for n in FUNCTION_NAMES if n not in ("linear", "quadratic"))
PRESETS = {"nevergrad": {"decay": 0.99}, "rl": {"decay": 0.995}}


@dataclass
class VanillaConfig:
    sigma: float = 0.01
    step_size: float = 0.02
    samples_per_iter: Optional[int] = None  # None means d


@dataclass
class ExperimentSpec:
    function: str = "sphere"
    dim: int = 100
    algo: str = "asebo"
    budget: int = 50_000
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out: str = "runs"
    log_every: int = 1
    mode: str = "min"
    theta0_norm: float = 10.0
    theta0_seed: int = 0
    checkpoints: int = 50
    max_iters: int = 1_000_000
    asebo: AseboConfig = field(default_factory=lambda: AseboConfig(total_iters=1_000_000))
    vanilla: VanillaConfig = field(default_factory=VanillaConfig)

    def __post_init__(self):
        if isinstance(self.asebo, dict):
            self.asebo = AseboConfig.from_dict(self.asebo)
        if isinstance(self.vanilla, dict):
            self.vanilla = VanillaConfig(**self.vanilla)
        self.seeds = [int(s) for s in self.seeds]

    def validate(self):
        if self.function not in FUNCTION_NAMES:
            raise ValueError(f"unknown function {self.function!r}")
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}; choose from {', '.join(ALGOS)}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.dim < 1 or self.log_every < 1 or self.checkpoints < 1 or self.max_iters < 1:
            raise ValueError("dim, log_every, checkpoints and max_iters must be positive")
        Mode(self.mode)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["asebo"] = self.asebo.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_dict(json.loads(text))


# --- running ----------------------------------------------------------------


def run_seed(spec: ExperimentSpec, seed: int) -> RunRecord:
    f = make_function(spec.function, spec.dim)
    theta0 = initial_point(spec.dim, spec.theta0_norm, spec.theta0_seed)
    if spec.algo == "asebo":
        cfg = replace(spec.asebo, seed=seed, total_iters=spec.max_iters)
        _, rec = asebo_optimize(f, theta0, cfg, mode=spec.mode, budget=spec.budget)
    else:
        v = spec.vanilla
        k = spec.dim if v.samples_per_iter is None else v.samples_per_iter
        _, rec = vanilla_es(f, theta0, v.sigma, v.step_size, k, spec.max_iters, seed=seed,
                            mode=spec.mode, budget=spec.budget)
    return rec


def _run_seed_args(args):
    return run_seed(*args)


def checkpoint_grid(budget: int, count: int) -> list[int]:
    grid = np.unique(np.ceil(np.linspace(budget / count, budget, count)).astype(int))
    return [int(q) for q in grid]


def best_at(rec: RunRecord, queries: int) -> Optional[float]:
    """best_value after the last iteration whose cumulative queries fit in ``queries``."""
    val = None
    for row in rec.rows:
        if row.queries > queries:
            break
        val = row.best_value
    return val


def summarize(spec: ExperimentSpec, records: dict) -> dict:
    seeds = list(records)
    points = []
    for q in checkpoint_grid(spec.budget, spec.checkpoints):
        vals = [v for v in (best_at(records[s], q) for s in seeds) if v is not None]
        if vals:
            q25, med, q75 = (float(x) for x in np.percentile(vals, [25, 50, 75]))
        else:
            q25 = med = q75 = None
        points.append({"queries": q, "seeds": len(vals), "median": med, "q25": q25, "q75": q75})
    finals = [records[s].best_value for s in seeds]
    return {
        "spec": spec.to_dict(),
        "checkpoints": points,
        "final": {
            "median_best_value": float(np.median(finals)),
            "best_value": {str(s): records[s].best_value for s in seeds},
            "queries": {str(s): records[s].queries for s in seeds},
            "overshoot": {str(s): records[s].overshoot for s in seeds},
            "iterations": {str(s): len(records[s].rows) for s in seeds},
        },
    }


def csv_name(spec: ExperimentSpec, seed: int) -> str:
    return f"{spec.algo}_{spec.function}_d{spec.dim}_seed{seed}.csv"


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> dict:
    """Run every seed, write CSVs and summary.json under ``spec.out``; return the summary."""
    spec.validate()
    args = [(spec, s) for s in spec.seeds]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            recs = list(pool.map(_run_seed_args, args))
    else:
        recs = [run_seed(*a) for a in args]
    records = dict(zip(spec.seeds, recs))

    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed, rec in records.items():
        rows = rec.rows
        kept = [r for i, r in enumerate(rows) if i % spec.log_every == 0 or i == len(rows) - 1]
        RunRecord(kept, rec.budget).write_csv(out / csv_name(spec, seed))
        log.info("seed %d: best %.6g after %d queries", seed, rec.best_value, rec.queries)
    summary = summarize(spec, records)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


# --- plotting ---------------------------------------------------------------


def plot_summary(summary_path, out_path, logy: bool = True):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "asebo"
    summary = json.loads(Path(summary_path).read_text(encoding="utf-8"))
    pts = [p for p in summary["checkpoints"] if p["median"] is not None]
    q = [p["queries"] for p in pts]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(q, [p["median"] for p in pts], lw=1.5, label=summary["spec"]["algo"])
    ax.fill_between(q, [p["q25"] for p in pts], [p["q75"] for p in pts], alpha=0.25)
    if logy and all(p["q25"] > 0 for p in pts):
        ax.set_yscale("log")
    ax.set_xlabel("queries")
    ax.set_ylabel("best value")
    ax.set_title(f'{summary["spec"]["function"]}, d={summary["spec"]["dim"]}')
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- argument parsing -------------------------------------------------------


def _seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise argparse.ArgumentTypeError("need at least one seed")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asebo", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize a benchmark over several seeds")
    run.add_argument("--config", help="experiment spec JSON; flags below override it")
    run.add_argument("--function", choices=CLI_FUNCTIONS)
    run.add_argument("--dim", type=int)
    run.add_argument("--algo", choices=ALGOS)
    run.add_argument("--budget", type=int, help="total objective queries, explorer probes included")
    run.add_argument("--seeds", type=_seeds, help="comma-separated, e.g. 1,2,3")
    run.add_argument("--sigma", type=float)
    run.add_argument("--eta", type=float, help="Adam step size")
    run.add_argument("--decay", type=float)
    run.add_argument("--pca-threshold", type=float)
    run.add_argument("--warmup", type=int)
    run.add_argument("--explorer", choices=("bandit", "cs"))
    run.add_argument("--alpha-rule", choices=("theorem", "fixed"))
    run.add_argument("--alpha", type=float, help="bandit rate used by --alpha-rule fixed")
    run.add_argument("--sampler", choices=("v0", "v1"))
    run.add_argument("--preset", choices=tuple(PRESETS))
    run.add_argument("--samples-per-iter", type=int, help="vanilla ES directions per iteration (default d)")
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    run.add_argument("--log-every", type=int, help="write every N-th iteration to the CSV")
    run.add_argument("--mode", choices=[m.value for m in Mode])
    run.add_argument("--jobs", type=int, default=1, help="seeds run in parallel")
    run.add_argument("--save-config", help="also write the resolved spec here")

    ver = sub.add_parser("verify", help="run the property suites")
    ver.add_argument("suite", nargs="?", default="all", choices=("all",) + SUITES)

    plot = sub.add_parser("plot", help="SVG learning curve from a summary JSON")
    plot.add_argument("summary")
    plot.add_argument("--out", default="curve.svg")
    plot.add_argument("--linear", action="store_true", help="linear y axis")
    return parser


def spec_from_args(args) -> ExperimentSpec:
    if args.config:
        spec = ExperimentSpec.from_json(Path(args.config).read_text(encoding="utf-8"))
    else:
        spec = ExperimentSpec(out=os.environ.get(OUT_ENV, "runs"))
    top = {"function": args.function, "dim": args.dim, "algo": args.algo, "budget": args.budget,
           "seeds": args.seeds, "out": args.out, "log_every": args.log_every, "mode": args.mode}
    spec = replace(spec, **{k: v for k, v in top.items() if v is not None})

    cfg = spec.asebo
    if args.preset:
        cfg = replace(cfg, **PRESETS[args.preset])
    core = {"sigma": args.sigma, "step_size": args.eta, "decay": args.decay,
            "pca_threshold": args.pca_threshold, "warmup_iters": args.warmup, "sampler_variant": args.sampler}
    cfg = replace(cfg, **{k: v for k, v in core.items() if v is not None})
    exp = cfg.explorer
    if args.explorer == "cs" and not isinstance(exp, CompressedSensingExplorer):
        exp = CompressedSensingExplorer()
    elif args.explorer == "bandit" and not isinstance(exp, BanditExplorer):
        exp = BanditExplorer()
    if isinstance(exp, BanditExplorer):
        bandit = {"alpha_rule": args.alpha_rule, "alpha": args.alpha}
        exp = replace(exp, **{k: v for k, v in bandit.items() if v is not None})
    cfg = replace(cfg, explorer=exp)

    van = spec.vanilla
    vs = {"sigma": args.sigma, "step_size": args.eta, "samples_per_iter": args.samples_per_iter}
    van = replace(van, **{k: v for k, v in vs.items() if v is not None})
    return replace(spec, asebo=cfg, vanilla=van)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "verify":
        checks = run_suites(args.suite)
        for chk in checks:
            print(chk.line())
        failed = sum(not c.passed for c in checks)
        print(f"{len(checks) - failed}/{len(checks)} checks passed")
        return 1 if failed else 0

    if args.command == "plot":
        plot_summary(args.summary, args.out, logy=not args.linear)
        return 0

    try:
        spec = spec_from_args(args)
        spec.validate()
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.save_config:
        Path(args.save_config).write_text(spec.to_json(), encoding="utf-8")
    try:
        summary = run_experiment(spec, jobs=args.jobs)
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    final = summary["final"]
    print(f"{spec.algo} on {spec.function} d={spec.dim}: median best {final['median_best_value']:.6g} "
          f"over {len(spec.seeds)} seeds; wrote {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
