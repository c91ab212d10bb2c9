#!/usr/bin/env python3
"""Frequency table of the selected number of groups.

Runs the eigen-gap selection over a grid of (n, T) for one model and prints
the fraction of repetitions selecting each group count (columns 1,2,3,4,5+).
"""

import argparse

from panelcluster.simulation import SimulationConfig, run_batch


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default="model2",
                        choices=["logistic", "model1", "model2", "model3",
                                 "model4"])
    parser.add_argument("--reps", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--error-dist", default="normal",
                        choices=["normal", "t3"])
    parser.add_argument("--gmax", type=int, default=10)
    parser.add_argument("--n", type=int, nargs="+", default=[40])
    parser.add_argument("--T", type=int, nargs="+", default=[160])
    args = parser.parse_args()

    columns = ["1", "2", "3", "4", "5+"]
    print(f"{'n':>4} {'T':>5} " + " ".join(f"{c:>6}" for c in columns))
    for n in args.n:
        for T in args.T:
            config = SimulationConfig(model=args.model, n=n, T=T,
                                      reps=args.reps, seed=args.seed,
                                      error_dist=args.error_dist,
                                      G_max=args.gmax,
                                      select_groups=True,
                                      cluster_at_true_g=False)
            table = run_batch(config).aggregates["group_count_table"]
            print(f"{n:>4} {T:>5} "
                  + " ".join(f"{table[c]:>6.2f}" for c in columns))


if __name__ == "__main__":
    main()
