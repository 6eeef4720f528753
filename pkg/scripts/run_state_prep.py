#!/usr/bin/env python3
"""Variational state preparation: 30 random initializations per layer count.

With --ensemble, trains against several random targets (violin-plot data);
otherwise a single quasi-random target.  Outputs include populations.csv and
Wigner grids of the best run.
"""

import argparse

from cvion import experiments, qnn


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/state_prep")
    parser.add_argument("--target-seed", type=int, default=0)
    parser.add_argument("--ensemble", type=int, default=0,
                        help="number of random targets (0 = single target)")
    parser.add_argument("--inits", type=int, default=30)
    parser.add_argument("--max-iters", type=int, default=1500)
    parser.add_argument("--base-seed", type=int, default=77)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    if args.ensemble > 0:
        target, seeds = None, tuple(range(args.ensemble))
    else:
        target, seeds = experiments.random_target_state(args.target_seed), None
    record = experiments.state_prep_experiment(
        target=target,
        target_seeds=seeds,
        n_inits=args.inits,
        train_cfg=qnn.TrainConfig(max_iters=args.max_iters),
        base_seed=args.base_seed,
        threads=args.threads,
    )
    out = experiments.save_run_record(record, args.out_dir)
    print(f"-> {out}")
    for nl, stats in record.final_metrics["per_layer"].items():
        print(f"layers={nl}: max F {stats['max_fidelity']:.4f} "
              f"mean F {stats['mean_fidelity']:.4f}")


if __name__ == "__main__":
    main()
