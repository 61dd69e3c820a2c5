#!/usr/bin/env python3
"""Parity simulation study: naive staged trees vs the naive-Bayes baseline.

Runs the headline regime plus a coverage sweep showing how training-set
coverage of the deepest tree level drives the staged tree's accuracy.
"""

import argparse

from stagedtree.experiments import aggregate_reports, format_table, xor_experiment


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--test", type=int, default=10000)
    args = parser.parse_args()

    for n_features, n_train in ((10, 200), (8, 200), (10, 780)):
        print(f"\n=== features={n_features}  N_train={n_train}  N_test={args.test} ===")
        rows = xor_experiment(
            n_features=n_features,
            n_train=n_train,
            n_test=args.test,
            n_seeds=args.seeds,
            master_seed=args.master_seed,
        )
        print(format_table(aggregate_reports(rows)))


if __name__ == "__main__":
    main()
