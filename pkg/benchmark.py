#!/usr/bin/env python3
"""
Glassbox — Utility and overhead experiments on synthetic microdata.

Sweeps one knob at a time (l, qd, s, or n), anonymizes with every selected
algorithm, measures count-query workload error and runtime, and writes a JSON
result file plus one figure per sweep.

Usage:
    python benchmark.py --sweep l --values 2 4 6 8 10
    python benchmark.py --sweep n --values 25000 50000 100000 --algos tailor ace hybrid
    python benchmark.py --n 10000 --rho 0.8 --output_dir figures
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from tqdm import tqdm

from config.settings import settings
from src.anonymization.dataio import synthesize, synthetic_schema
from src.anonymization.errors import InfeasibleError
from src.anonymization.registry import Algorithm, AlgorithmSpec, run
from src.anonymization.utility import generate_workload, workload_error

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s | %(name)-25s | %(levelname)-7s | %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)
logger = logging.getLogger(__name__)

DEFAULT_ALGOS = ["tailor", "ace", "hybrid", "mondrian", "mask"]


def make_spec(algo: str, l: int, universe) -> AlgorithmSpec:
    """Mask protects every value so its output is comparable to the l-diverse algorithms."""
    if algo == Algorithm.MASK.value:
        return AlgorithmSpec(Algorithm.MASK, l, k=l, protected=frozenset(universe))
    return AlgorithmSpec(Algorithm(algo), l)


def run_point(algo: str, n: int, rho: float, l: int, qd: int, s: float, queries: int, seed: int) -> dict:
    schema = synthetic_schema()
    table = synthesize(n, schema, rho, seed)
    spec = make_spec(algo, l, schema.sensitive_values)
    start = time.perf_counter()
    try:
        published = run(spec, table, seed)
    except InfeasibleError as e:
        logger.warning(f"{spec.describe()} failed on n={n}: {e}")
        published = None
    seconds = time.perf_counter() - start
    if published is None:
        logger.warning(f"{spec.describe()} returned nothing on n={n}")
        return {"algo": algo, "n": n, "l": l, "qd": qd, "s": s, "seconds": seconds, "workload_error": None}
    diverse = all(
        l * max(g.sensitive.count(v) for v in set(g.sensitive)) <= g.size for g in published.groups
    )
    workload = generate_workload(schema, qd, s, queries, seed)
    result = workload_error(table, published, workload)
    return {
        "algo": algo,
        "n": n,
        "l": l,
        "qd": qd,
        "s": s,
        "seconds": round(seconds, 4),
        "groups": len(published.groups),
        "l_diverse": diverse,
        "workload_error": round(result.workload_error, 6),
    }


def plot_sweep(results: list[dict], knob: str, metric: str, out_path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for algo in sorted({r["algo"] for r in results}):
        pts = sorted((r[knob], r[metric]) for r in results if r["algo"] == algo and r[metric] is not None)
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=algo)
    ax.set_xlabel(knob)
    ax.set_ylabel("runtime (s)" if metric == "seconds" else "workload error")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    logger.info(f"Saved {out_path}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=10_000, help="Synthetic table size")
    parser.add_argument("--rho", type=float, default=0.8, help="QI/sensitive correlation knob")
    parser.add_argument("--l", type=int, default=settings.default_l)
    parser.add_argument("--qd", type=int, default=settings.default_qd)
    parser.add_argument("--sel", type=float, default=settings.default_selectivity)
    parser.add_argument("--queries", type=int, default=settings.default_queries)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sweep", choices=["none", "l", "qd", "s", "n"], default="none")
    parser.add_argument("--values", type=float, nargs="*", default=None, help="Sweep values")
    parser.add_argument("--algos", nargs="*", default=DEFAULT_ALGOS, choices=[a.value for a in Algorithm])
    parser.add_argument("--output", type=str, default="benchmark_results.json")
    parser.add_argument("--output_dir", type=str, default="figures", help="Directory to save figures")
    args = parser.parse_args()

    base = {"n": args.n, "l": args.l, "qd": args.qd, "s": args.sel}
    values = args.values if args.sweep != "none" and args.values else [None]
    points = []
    for v in values:
        cfg = dict(base)
        if v is not None:
            cfg[args.sweep] = v if args.sweep == "s" else int(v)
        points.extend((algo, cfg) for algo in args.algos)

    results = []
    for algo, cfg in tqdm(points, desc="runs"):
        results.append(run_point(algo, cfg["n"], args.rho, cfg["l"], cfg["qd"], cfg["s"], args.queries, args.seed))
        r = results[-1]
        logger.info(f"{algo:<9} n={r['n']} l={r['l']} qd={r['qd']} s={r['s']}: "
                    f"error={r['workload_error']} time={r['seconds']}s")

    errors = {(r["algo"], r["n"], r["l"], r["qd"], r["s"]): r["workload_error"] for r in results}
    for (algo, *key), err in errors.items():
        other = errors.get(("hybrid", *key))
        if algo == "ace" and err is not None and other is not None:
            logger.info(f"trend at n={key[0]} l={key[1]}: ace {err} vs hybrid {other}")

    out_path = Path(args.output)
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump({"config": vars(args), "results": results}, f, indent=2)
    logger.info(f"Results saved to {out_path}")

    if args.sweep != "none":
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metric = "seconds" if args.sweep == "n" else "workload_error"
        plot_sweep(results, args.sweep, metric, out_dir / f"sweep_{args.sweep}.png")


if __name__ == "__main__":
    main()
