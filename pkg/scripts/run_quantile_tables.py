#!/usr/bin/env python3
"""Membership-recovery tables for the quantile designs (model1..model4).

Prints perfect-match / average-match columns over a grid of (n, T), with
optional t(3) errors and ablation methods.
"""

import argparse

from panelcluster.simulation import SimulationConfig, run_batch


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default="model1",
                        choices=["model1", "model2", "model3", "model4"])
    parser.add_argument("--reps", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tau", type=float, default=0.5)
    parser.add_argument("--error-dist", default="normal",
                        choices=["normal", "t3"])
    parser.add_argument("--n", type=int, nargs="+", default=[30])
    parser.add_argument("--T", type=int, nargs="+", default=[60, 120])
    parser.add_argument("--methods", nargs="+", default=["spectral"])
    args = parser.parse_args()

    header = f"{'n':>4} {'T':>5}"
    for m in args.methods:
        header += f" {m + ':perfect':>22} {m + ':average':>22}"
    print(header)
    for n in args.n:
        for T in args.T:
            config = SimulationConfig(model=args.model, n=n, T=T,
                                      reps=args.reps, seed=args.seed,
                                      tau=args.tau,
                                      error_dist=args.error_dist,
                                      methods=tuple(args.methods))
            agg = run_batch(config).aggregates
            row = f"{n:>4} {T:>5}"
            for m in args.methods:
                row += (f" {agg[m]['perfect_match']:>22.3f}"
                        f" {agg[m]['average_match']:>22.4f}")
            print(row)


if __name__ == "__main__":
    main()
