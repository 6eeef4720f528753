"""Command-line entry point.

Subcommands: bench-gate, train-regression, prepare-state, wigner, validate.
Config files are JSON; frequencies are plain Hz (e.g. 3.0e6) and are
converted to angular units internally.  Unknown config keys are rejected.
Exit codes: 0 success, 2 config error, 3 numerical-convergence failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, experiments, fock, gates, ion, qnn
from .evolve import ConvergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


def _load_config(path: str, allowed: set[str], required: set[str]) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {p} must be a JSON object")
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    missing = required - set(cfg)
    if missing:
        raise ConfigError(f"missing required config keys {sorted(missing)}")
    return cfg


def _ion_config(cfg: dict) -> ion.IonConfig:
    return ion.IonConfig(
        nu=TWO_PI * float(cfg.get("nu_hz", 3.0e6)),
        rabi0=TWO_PI * float(cfg.get("rabi0_hz", 1.0e5)),
        eta=float(cfg.get("eta", 0.05)),
        nu_y=TWO_PI * cfg["nu_y_hz"] if cfg.get("nu_y_hz") is not None else None,
        eta_y=cfg.get("eta_y"),
        lamb_dicke_correction=bool(cfg.get("lamb_dicke_correction", False)),
    )


_GATE_FIELDS = {
    "Phase": ("theta",),
    "Displace": ("alpha",),
    "Squeeze": ("r", "phi"),
    "BeamSplitter": ("theta", "phi"),
    "TwoModeSqueeze": ("r", "phi"),
    "Trisqueeze": ("r", "phi"),
    "Kerr": ("tau",),
}


def _gate_from_dict(d: dict) -> ion.GateSpec:
    if "kind" not in d:
        raise ConfigError("gate needs a 'kind' field")
    kind = d["kind"]
    if kind not in _GATE_FIELDS:
        raise ConfigError(f"unknown gate kind {kind!r}; one of {sorted(_GATE_FIELDS)}")
    unknown = set(d) - {"kind", *_GATE_FIELDS[kind]}
    if unknown:
        raise ConfigError(f"unknown gate fields {sorted(unknown)} for {kind}")
    args = []
    for name in _GATE_FIELDS[kind]:
        if name not in d:
            if name == "phi":
                args.append(0.0)
                continue
            raise ConfigError(f"gate {kind} missing field {name!r}")
        v = d[name]
        if name == "alpha":
            args.append(complex(v[0], v[1]) if isinstance(v, list) else complex(v))
        else:
            args.append(float(v))
    return getattr(ion, kind)(*args)


def _state_from_dict(d: dict, cutoff: int) -> fock.FockVector:
    kind = d.get("kind")
    if kind == "vacuum":
        return fock.vacuum(cutoff)
    if kind == "fock":
        return fock.fock_state(int(d["n"]), cutoff)
    if kind == "coherent":
        a = d["alpha"]
        alpha = complex(a[0], a[1]) if isinstance(a, list) else complex(a)
        return fock.coherent(alpha, cutoff)
    if kind == "cat":
        a = d["alpha"]
        alpha = complex(a[0], a[1]) if isinstance(a, list) else complex(a)
        plus = fock.coherent(alpha, cutoff).amplitudes + fock.coherent(-alpha, cutoff).amplitudes
        return fock.FockVector(plus / np.linalg.norm(plus), (cutoff,))
    raise ConfigError(f"unknown state kind {kind!r}; one of vacuum, fock, coherent, cat")


def _cmd_bench_gate(args) -> int:
    allowed = {"gate", "nu_hz", "rabi0_hz", "eta", "nu_y_hz", "eta_y",
               "lamb_dicke_correction", "eta_grid", "samples", "cutoff",
               "initial", "engine", "period_tol"}
    cfg = _load_config(args.config, allowed, {"gate"})
    gate = _gate_from_dict(cfg["gate"])
    ion_cfg = _ion_config(cfg)
    cutoff = int(cfg.get("cutoff", experiments.BENCHMARK_CUTOFFS.get(type(gate), 32)))
    initial = _state_from_dict(cfg["initial"], cutoff) if "initial" in cfg else fock.vacuum(cutoff)
    engine = cfg.get("engine", "effective" if args.mode == "ideal" else "full")
    record = experiments.gate_benchmark(
        gate,
        ion_cfg,
        initial=initial,
        samples=int(cfg.get("samples", 20)),
        eta_grid=tuple(cfg.get("eta_grid", experiments.DEFAULT_ETA_GRID)),
        engine=engine,
        period_tol=float(cfg.get("period_tol", 1e-8)),
        threads=args.threads,
    )
    out = experiments.save_run_record(record, args.out_dir)
    m = record.final_metrics
    print(f"best fidelity {m['best_fidelity']:.6f} at eta={m['best_eta']} -> {out}")
    return EXIT_OK


def _train_cfg(cfg: dict, seed: int, default_iters: int) -> qnn.TrainConfig:
    return qnn.TrainConfig(
        learning_rate=float(cfg.get("learning_rate", 0.001)),
        beta1=float(cfg.get("beta1", 0.9)),
        beta2=float(cfg.get("beta2", 0.999)),
        epsilon=float(cfg.get("epsilon", 1e-8)),
        max_iters=int(cfg.get("max_iters", default_iters)),
        fd_step=float(cfg.get("fd_step", 1e-4)),
        seed=seed,
    )


def _cmd_train_regression(args) -> int:
    allowed = {"target_fn", "layer_counts", "n_seeds", "n_train", "n_test", "cutoff",
               "learning_rate", "beta1", "beta2", "epsilon", "max_iters", "fd_step"}
    cfg = _load_config(args.config, allowed, set())
    fn = cfg.get("target_fn", "sine")
    if fn not in experiments.TARGET_FUNCTIONS:
        raise ConfigError(f"unknown target_fn {fn!r}")
    record = experiments.regression_experiment(
        target_fn=fn,
        layer_counts=tuple(cfg.get("layer_counts", (1, 2, 3, 4, 6))),
        n_seeds=int(cfg.get("n_seeds", 11)),
        n_train=int(cfg.get("n_train", 50)),
        n_test=int(cfg.get("n_test", 50)),
        cutoff=int(cfg.get("cutoff", 30)),
        train_cfg=_train_cfg(cfg, 0, 2000),
        base_seed=args.seed,
        threads=args.threads,
    )
    out = experiments.save_run_record(record, args.out_dir)
    for nl, stats in record.final_metrics["per_layer"].items():
        print(f"layers={nl}: mean test MSE {stats['mean_test_mse']:.5f} "
              f"(std {stats['std_test_mse']:.5f})")
    print(f"-> {out}")
    return EXIT_OK


def _cmd_prepare_state(args) -> int:
    allowed = {"target_seed", "target_seeds", "envelope_sigma", "layer_counts", "n_inits",
               "cutoff", "learning_rate", "beta1", "beta2", "epsilon", "max_iters", "fd_step"}
    cfg = _load_config(args.config, allowed, set())
    sigma = float(cfg.get("envelope_sigma", 5.0))
    if "target_seeds" in cfg:
        target, seeds = None, tuple(int(s) for s in cfg["target_seeds"])
    else:
        target = experiments.random_target_state(int(cfg.get("target_seed", 0)), sigma)
        seeds = None
    record = experiments.state_prep_experiment(
        target=target,
        target_seeds=seeds,
        layer_counts=tuple(cfg.get("layer_counts", (1, 2, 3))),
        n_inits=int(cfg.get("n_inits", 30)),
        cutoff=int(cfg.get("cutoff", 20)),
        train_cfg=_train_cfg(cfg, 0, 1500),
        base_seed=args.seed,
        threads=args.threads,
    )
    if args.mode == "physical":
        _attach_physical_check(record, cfg)
    out = experiments.save_run_record(record, args.out_dir)
    for nl, stats in record.final_metrics["per_layer"].items():
        print(f"layers={nl}: max fidelity {stats['max_fidelity']:.4f}")
    print(f"-> {out}")
    return EXIT_OK


def _attach_physical_check(record, cfg: dict) -> None:
    """Re-evaluate the best checkpoint with effective-Hamiltonian gate evolutions."""
    best = record.final_metrics["best"]
    ckpt = best["checkpoint"]
    layers = tuple(qnn.QnnLayerParams(**d) for d in ckpt["layers"])
    model = qnn.QnnModel(layers, cutoff=ckpt["cutoff"])
    ion_cfg = _ion_config(cfg if "nu_hz" in cfg else {})
    prepared = qnn.forward(model, fock.vacuum(model.cutoff), "physical", ion_cfg)
    spec = experiments.random_target_state(
        record.config["target_seeds"][0], record.config["envelope_sigma"]
    )
    best["physical_fidelity"] = analysis.fidelity(prepared, spec.as_state(model.cutoff))


def _cmd_wigner(args) -> int:
    allowed = {"state", "cutoff", "resolution", "x_range", "p_range"}
    cfg = _load_config(args.config, allowed, {"state"})
    cutoff = int(cfg.get("cutoff", 30))
    state = _state_from_dict(cfg["state"], cutoff)
    grid = analysis.wigner(
        state,
        x_range=tuple(cfg.get("x_range", (-5.0, 5.0))),
        p_range=tuple(cfg.get("p_range", (-5.0, 5.0))),
        resolution=int(cfg.get("resolution", 201)),
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    analysis.wigner_to_csv(grid, out / "wigner.csv")
    analysis.wigner_to_json(grid, out / "wigner.json", description=json.dumps(cfg["state"]))
    print(f"min W = {grid.min_value():.6f}, integral = {grid.integral():.6f} -> {out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    """Built-in oracle and invariant checks; exits 3 if any fail."""
    checks: list[tuple[str, bool]] = []

    def check(name: str, ok: bool):
        checks.append((name, bool(ok)))
        print(f"{'PASS' if ok else 'FAIL'}  {name}")

    from .evolve import propagate_const

    # expm against a Taylor-series oracle
    rng = np.random.default_rng(0)
    m = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    h = fock.DenseOperator((m + m.conj().T) / 2.0, (16,))
    psi = fock.FockVector(rng.normal(size=16) + 1j * rng.normal(size=16), (16,))
    taylor = psi.amplitudes.copy()
    term = psi.amplitudes.copy()
    for k in range(1, 60):
        term = (-1j * 0.7) / k * (h.entries @ term)
        taylor += term
    out = propagate_const(h, 0.7, psi)
    check("expm vs Taylor oracle < 1e-9", float(np.abs(out.amplitudes - taylor).max()) < 1e-9)

    # effective Hamiltonian evolution reproduces each ideal gate
    cfg1 = ion.IonConfig(nu=TWO_PI * 3e6, rabi0=TWO_PI * 1e5, eta=0.05)
    cfg2 = replace(cfg1, nu_y=TWO_PI * 2.1e6, eta_y=0.04)
    cases = [
        (ion.Phase(0.7), cfg1, (24,), fock.coherent(1.0, 24)),
        (ion.Displace(1.2 + 0.5j), cfg1, (24,), fock.vacuum(24)),
        (ion.Squeeze(0.6, 0.4), cfg1, (24,), fock.vacuum(24)),
        (ion.Trisqueeze(0.2, 0.3), cfg1, (24,), fock.vacuum(24)),
        (ion.Kerr(1.1), cfg1, (24,), fock.coherent(1.0, 24)),
        (ion.BeamSplitter(0.8, 0.2), cfg2, (8, 8), fock.tensor(fock.fock_state(1, 8), fock.vacuum(8))),
        (ion.TwoModeSqueeze(0.4, 0.1), cfg2, (8, 8), fock.tensor(fock.vacuum(8), fock.vacuum(8))),
    ]
    worst = 1.0
    for gate, c, cutoffs, init in cases:
        t_gate, _ = ion.gate_time_and_drive(gate, c)
        h_eff = ion.effective_hamiltonian(gate, c, cutoffs)
        full = propagate_const(h_eff, t_gate, fock.tensor(fock.spin_plus_state(), init))
        nd = init.dim
        amps = full.amplitudes.reshape(2, nd)
        reduced = fock.FockVector((amps[0] + amps[1]) / math.sqrt(2.0), init.layout)
        target = gates.ideal_unitary(gate, cutoffs) @ init
        worst = min(worst, float(abs(np.vdot(reduced.amplitudes, target.amplitudes)) ** 2))
    check("effective H evolution = ideal gate, F >= 1-1e-9 (7 gates)", worst >= 1.0 - 1e-9)

    # Wigner vacuum value and normalization
    grid = analysis.wigner(fock.vacuum(16))
    check("Wigner vacuum W(0,0) = 1/pi +- 1e-6", abs(grid.value_at(0, 0) - 1 / math.pi) < 1e-6)
    check("Wigner grid integral = 1 +- 1e-2", abs(grid.integral() - 1.0) < 1e-2)

    # FD gradient step-halving consistency
    def loss(p):
        return float(np.sum(np.sin(p) ** 2))

    p0 = np.array([0.3, -0.7, 1.1])
    g1 = qnn.grad_fd(loss, p0, 1e-4)
    g2 = qnn.grad_fd(loss, p0, 5e-5)
    rel = float(np.abs(g1 - g2).max() / np.abs(g1).max())
    check("FD gradient step-halving relative diff < 1e-4", rel < 1e-4)

    failed = [name for name, ok in checks if not ok]
    if failed:
        print(f"{len(failed)} check(s) failed")
        return EXIT_NUMERICAL
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvion",
        description="Trapped-ion continuous-variable gate and QNN experiment runner. "
        "Config frequencies are in Hz (converted to angular units internally).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON config file path")
        p.add_argument("--seed", type=int, default=0, help="base seed for the run")
        p.add_argument("--out-dir", default="out", help="output directory for result files")
        p.add_argument("--mode", choices=("ideal", "physical"), default="ideal",
                       help="gate engine for network evaluation / benchmarks")
        p.add_argument("--threads", type=int, default=1, help="worker pool size")

    p = sub.add_parser("bench-gate", help="full-dynamics gate fidelity benchmark "
                       "(config keys: gate, nu_hz, rabi0_hz, eta_grid, samples, cutoff, "
                       "initial, engine, lamb_dicke_correction, period_tol)")
    add_common(p)
    p.set_defaults(func=_cmd_bench_gate)

    p = sub.add_parser("train-regression", help="QNN function regression "
                       "(config keys: target_fn, layer_counts, n_seeds, n_train, n_test, "
                       "cutoff, learning_rate, beta1, beta2, epsilon, max_iters, fd_step)")
    add_common(p)
    p.set_defaults(func=_cmd_train_regression)

    p = sub.add_parser("prepare-state", help="variational state preparation "
                       "(config keys: target_seed(s), envelope_sigma, layer_counts, n_inits, "
                       "cutoff, learning_rate, beta1, beta2, epsilon, max_iters, fd_step)")
    add_common(p)
    p.set_defaults(func=_cmd_prepare_state)

    p = sub.add_parser("wigner", help="render a Wigner grid for a described state "
                       "(config keys: state, cutoff, resolution, x_range, p_range)")
    add_common(p)
    p.set_defaults(func=_cmd_wigner)

    p = sub.add_parser("validate", help="run the built-in oracle/invariant suite")
    add_common(p, needs_config=False)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fock.CutoffTooSmallError, fock.InvalidDimensionError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
