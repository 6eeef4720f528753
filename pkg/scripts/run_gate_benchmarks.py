#!/usr/bin/env python3
"""Run the four gate-fidelity benchmarks over the Lamb-Dicke sweep.

Produces one run directory per gate with record.json, trace.csv, and the
Wigner grids of the best-eta final and target states.
"""

import argparse
import math

from cvion import experiments, fock, ion


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/benchmarks")
    parser.add_argument("--samples", type=int, default=20)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    base = ion.IonConfig(nu=2 * math.pi * 3e6, rabi0=2 * math.pi * 1e5, eta=0.05)
    runs = [
        ("displacement", ion.Displace(3.0), base, fock.vacuum(40)),
        ("squeeze", ion.Squeeze(1.4), base, fock.coherent(1.0, 60)),
        ("trisqueeze", ion.Trisqueeze(0.32), base, fock.vacuum(32)),
        ("kerr", ion.Kerr(math.pi),
         ion.IonConfig(nu=base.nu, rabi0=base.rabi0, eta=base.eta, lamb_dicke_correction=True),
         fock.coherent(1.5, 32)),
    ]
    for name, gate, cfg, initial in runs:
        record = experiments.gate_benchmark(
            gate, cfg, initial=initial, samples=args.samples, threads=args.threads
        )
        out = experiments.save_run_record(record, f"{args.out_dir}/{name}")
        m = record.final_metrics
        print(f"{name}: best fidelity {m['best_fidelity']:.6f} at eta={m['best_eta']} -> {out}")
        for cell in m["per_eta"]:
            print(f"  eta={cell['eta']}: F={cell['final_fidelity']:.6f} "
                  f"leakage={cell['max_leakage']:.2e} periods={cell['periods']}")


if __name__ == "__main__":
    main()
