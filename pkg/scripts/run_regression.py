#!/usr/bin/env python3
"""Train the CV-QNN regression experiments (sine and Heaviside targets).

Each run directory holds record.json with per-seed test MSEs and trace.csv
with the across-seed mean/std prediction curves per layer count.
"""

import argparse

from cvion import experiments, qnn


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/regression")
    parser.add_argument("--layer-counts", type=int, nargs="+", default=[1, 2, 3, 4, 6])
    parser.add_argument("--seeds", type=int, default=11)
    parser.add_argument("--max-iters", type=int, default=2000)
    parser.add_argument("--iters-per-layer", type=int, default=2000,
                        help="iteration budget per layer (deeper models train longer); "
                             "pass 0 to use a flat --max-iters budget")
    parser.add_argument("--base-seed", type=int, default=2024)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    for fn in ("sine", "heaviside"):
        record = experiments.regression_experiment(
            target_fn=fn,
            layer_counts=tuple(args.layer_counts),
            n_seeds=args.seeds,
            train_cfg=qnn.TrainConfig(max_iters=args.max_iters),
            base_seed=args.base_seed,
            threads=args.threads,
            iters_per_layer=args.iters_per_layer or None,
        )
        out = experiments.save_run_record(record, f"{args.out_dir}/{fn}")
        print(f"{fn} -> {out}")
        for nl, stats in record.final_metrics["per_layer"].items():
            print(f"  layers={nl}: mean test MSE {stats['mean_test_mse']:.5f} "
                  f"(std {stats['std_test_mse']:.5f})")


if __name__ == "__main__":
    main()
