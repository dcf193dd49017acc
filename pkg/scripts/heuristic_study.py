#!/usr/bin/env python3
"""Compare all activation heuristics on a batch of random connected graphs.

Runs the strong and weak regimes (and optionally finite delta) at budgets of
10/30/50% of n, then prints the mean normalised score per heuristic.

    python scripts/heuristic_study.py --graphs 10 --n 12 --finite-delta 1.0
"""

import argparse
from collections import defaultdict

import numpy as np

from fxlab.experiment import ExperimentConfig, GraphSource, run_experiment, write_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--graphs", type=int, default=8)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--density", type=float, default=2.0, help="edges per node")
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--finite-delta", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-prefix", default=None, help="write <prefix>-<regime>.csv")
    args = ap.parse_args(argv)

    m = max(args.n - 1, int(args.density * args.n))
    sources = [GraphSource(f"rc{i}", gen=f"random-connected({args.n},{m},{args.seed + i})")
               for i in range(args.graphs)]
    regimes = [("strong", None), ("weak", None)]
    if args.finite_delta is not None:
        regimes.append(("finite", args.finite_delta))

    for regime, delta in regimes:
        cfg = ExperimentConfig(graphs=sources, regime=regime, delta=delta,
                               trials=args.trials, seed=args.seed)
        report = run_experiment(cfg)
        if args.out_prefix:
            write_report(report, f"{args.out_prefix}-{regime}.csv")
        scores = defaultdict(list)
        for row in report.rows:
            scores[(row.k, row.heuristic)].append(row.normalized_score)
        print(f"== {regime}" + (f" (delta={delta})" if delta is not None else ""))
        for (k, h), vals in sorted(scores.items()):
            print(f"  k={k:<3d} {h:<14s} {np.mean(vals):.4f}  (min {np.min(vals):.4f})")


if __name__ == "__main__":
    main()
