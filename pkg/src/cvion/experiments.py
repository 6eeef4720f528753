"""Seeded experiment runners: gate benchmarks, regression, state preparation.

Every run produces a RunRecord whose metrics are a pure function of the
configuration and seed, so records can be regenerated bit-identically.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis, fock, gates, ion, qnn
from .evolve import PeriodicDrivePropagator, matrix_power_unitary, mode_leakage, propagate_const
from .fock import FockVector

SCHEMA_VERSION = 1
DEFAULT_ETA_GRID = (0.02, 0.05, 0.1, 0.15)
LEAKAGE_RELIABLE_THRESHOLD = 1e-3

# cutoffs sized so initial/target truncation leakage stays below 1e-6
BENCHMARK_CUTOFFS = {
    ion.Phase: 32,
    ion.Displace: 40,
    ion.Squeeze: 60,
    ion.Trisqueeze: 32,
    ion.Kerr: 32,
}


@dataclass(frozen=True)
class TargetStateSpec:
    """Quasi-random pure target on the first 20 Fock levels."""

    amplitudes: np.ndarray
    seed: int
    envelope_sigma: float

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (20,):
            raise ValueError(f"target length {amps.shape} != (20,)")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"target norm {norm} != 1")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def as_state(self, cutoff: int = 20) -> FockVector:
        if cutoff < 20:
            raise ValueError(f"cutoff {cutoff} < 20")
        padded = np.zeros(cutoff, dtype=np.complex128)
        padded[:20] = self.amplitudes
        return FockVector(padded, (cutoff,))


@dataclass
class RunRecord:
    experiment: str
    config: dict
    seeds: list
    traces: dict
    final_metrics: dict
    wall_time_s: float

    def to_json_dict(self) -> dict:
        return _jsonable({
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "config": self.config,
            "seeds": self.seeds,
            "traces": self.traces,
            "final_metrics": self.final_metrics,
            "wall_time_s": self.wall_time_s,
        })


def random_target_state(seed: int, envelope_sigma: float = 5.0) -> TargetStateSpec:
    """c_i = (complex uniform on [-1,1]^2) * exp(-i^2 / (2 sigma^2)), normalized."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    re = rng.uniform(-1.0, 1.0, 20)
    im = rng.uniform(-1.0, 1.0, 20)
    idx = np.arange(20, dtype=float)
    c = (re + 1j * im) * np.exp(-(idx**2) / (2.0 * envelope_sigma**2))
    c = c / np.linalg.norm(c)
    return TargetStateSpec(c, seed, envelope_sigma)


def _scaled_gate(gate: ion.GateSpec, s: float) -> ion.GateSpec:
    """Gate with its dimensionless parameter scaled by s (linear in time)."""
    if isinstance(gate, ion.Phase):
        return ion.Phase(gate.theta * s)
    if isinstance(gate, ion.Displace):
        return ion.Displace(gate.alpha * s)
    if isinstance(gate, ion.Squeeze):
        return ion.Squeeze(gate.r * s, gate.phi)
    if isinstance(gate, ion.Trisqueeze):
        return ion.Trisqueeze(gate.r * s, gate.phi)
    if isinstance(gate, ion.Kerr):
        return ion.Kerr(gate.tau * s)
    if isinstance(gate, ion.BeamSplitter):
        return ion.BeamSplitter(gate.theta * s, gate.phi)
    if isinstance(gate, ion.TwoModeSqueeze):
        return ion.TwoModeSqueeze(gate.r * s, gate.phi)
    raise TypeError(f"unknown gate {gate!r}")


def _pulse_start(drive: ion.DriveSpec) -> float:
    """Start time aligning a bichromatic envelope with its peak.

    Two tones at +/-delta with phases phi1, phi2 have envelope
    2 cos(delta t - (phi1 - phi2)/2) (up to a global phase); starting the
    pulse at the envelope maximum removes the DC bias the integrated
    carrier term would otherwise imprint on the spin.
    """
    if len(drive.tones) != 2:
        return 0.0
    delta = drive.tones[0].detuning
    if delta == 0.0:
        return 0.0
    phi_d = (drive.tones[0].phase - drive.tones[1].phase) / 2.0
    return phi_d / delta


def _carrier_frame_rate(prop: PeriodicDrivePropagator, u_period: np.ndarray) -> float:
    """Rotation rate of the frame in which the carrier drive is a pure Kerr.

    Extracted from the Floquet quasi-energies of the one-period propagator at
    n = 0 and n = 1 on the |+> spin branch (where the Kerr term vanishes),
    which captures the second-order light shift missed by the truncated
    analytic expansion.
    """
    cutoff = prop.mode_dim
    w, v = np.linalg.eig(u_period)
    plus = np.kron(np.array([1.0, 1.0]) / math.sqrt(2.0), np.eye(cutoff))
    eps: dict[int, float] = {}
    for i in range(w.size):
        cp = plus @ v[:, i]
        n = int(np.argmax(np.abs(cp)))
        if n in (0, 1) and abs(cp[n]) ** 2 > 0.9 and n not in eps:
            eps[n] = -float(np.angle(w[i])) / prop.period
    if set(eps) != {0, 1}:
        raise RuntimeError("could not identify |+,0> and |+,1> Floquet branches")
    return eps[1] - eps[0]


def _converged_period_propagator(
    prop: PeriodicDrivePropagator, t_start: float, tol: float = 1e-8, max_steps: int = 1 << 18
) -> tuple[np.ndarray, int]:
    """One-period propagator refined until successive halvings agree."""
    steps = 1024
    u_prev = prop.period_propagator(steps, t_start, t_start + prop.period)
    while steps < max_steps:
        steps *= 2
        u = prop.period_propagator(steps, t_start, t_start + prop.period)
        if float(np.abs(u - u_prev).max()) < tol:
            return u, steps
        u_prev = u
    return u_prev, steps


def _is_carrier(gate: ion.GateSpec) -> bool:
    return isinstance(gate, (ion.Phase, ion.Kerr))


def _benchmark_cell(
    gate: ion.GateSpec,
    config: ion.IonConfig,
    initial: FockVector,
    samples: int,
    engine: str,
    period_tol: float,
) -> dict:
    """Full- or effective-dynamics benchmark at one Lamb-Dicke parameter."""
    cutoff = initial.layout[0]
    t_gate, drive = ion.gate_time_and_drive(gate, config)
    psi = fock.tensor(fock.spin_plus_state(), initial)
    sample_times: list[float] = []
    states: list[np.ndarray] = []
    max_leak = 0.0

    if engine == "effective":
        h_eff = ion.effective_hamiltonian(gate, config, (cutoff,))
        for i in range(1, samples + 1):
            t = t_gate * i / samples
            out = propagate_const(h_eff, t, psi)
            sample_times.append(t)
            states.append(out.amplitudes)
            max_leak = max(max_leak, mode_leakage(out.amplitudes, out.layout))
        # the effective Hamiltonian already excludes the carrier light shift,
        # so no frame rotation is needed here
        frame_rate = 0.0
        steps_used, periods = 0, 0
    elif engine == "full":
        prop = PeriodicDrivePropagator(config, drive, (cutoff,))
        t_start = _pulse_start(drive)
        u_period, steps_used = _converged_period_propagator(prop, t_start, period_tol)
        periods = int(t_gate // prop.period)
        frame_rate = _carrier_frame_rate(prop, u_period) if _is_carrier(gate) else 0.0
        boundaries = [round(periods * i / samples) for i in range(samples + 1)]
        amps = psi.amplitudes
        for i in range(1, samples + 1):
            amps = matrix_power_unitary(u_period, boundaries[i] - boundaries[i - 1]) @ amps
            sample_times.append(boundaries[i] * prop.period)
            states.append(amps)
            max_leak = max(max_leak, mode_leakage(amps, psi.layout))
        t_rem = t_gate - periods * prop.period
        if t_rem > 1e-12 * t_gate:
            sub = max(4, int(steps_used * t_rem / prop.period))
            amps = prop.period_propagator(sub, t_start, t_start + t_rem) @ amps
            sample_times[-1] = t_gate
            states[-1] = amps
            max_leak = max(max_leak, mode_leakage(amps, psi.layout))
    else:
        raise ValueError(f"unknown engine {engine!r}")

    trace = []
    for t, amps in zip(sample_times, states):
        s = t / t_gate
        target = gates.ideal_unitary(_scaled_gate(gate, s), (cutoff,)) @ initial
        if frame_rate != 0.0:
            rot = np.exp(-1j * frame_rate * t * np.arange(cutoff))
            target = FockVector(rot * target.amplitudes, (cutoff,))
        reduced = fock.partial_trace(FockVector(amps, (2, cutoff)), 1)
        trace.append((t, s, analysis.fidelity(reduced, target)))

    final_state = fock.partial_trace(FockVector(states[-1], (2, cutoff)), 1)
    final_target = gates.ideal_unitary(gate, (cutoff,)) @ initial
    if frame_rate != 0.0:
        rot = np.exp(-1j * frame_rate * t_gate * np.arange(cutoff))
        final_target = FockVector(rot * final_target.amplitudes, (cutoff,))
    return {
        "eta": config.eta,
        "gate_time_s": t_gate,
        "periods": periods,
        "steps_per_period": steps_used,
        "frame_rate_rad_s": frame_rate,
        "final_fidelity": analysis.fidelity(final_state, final_target),
        "max_leakage": max_leak,
        "reliable": bool(max_leak < LEAKAGE_RELIABLE_THRESHOLD),
        "trace": trace,
        "final_state": final_state,
        "final_target": final_target,
    }


def gate_benchmark(
    gate: ion.GateSpec,
    config: ion.IonConfig,
    initial: FockVector | None = None,
    samples: int = 20,
    eta_grid: tuple[float, ...] = DEFAULT_ETA_GRID,
    engine: str = "full",
    with_wigner: bool = True,
    period_tol: float = 1e-8,
    threads: int = 1,
) -> RunRecord:
    """Benchmark one gate against its ideal unitary over a Lamb-Dicke sweep."""
    t0 = time.time()
    if initial is None:
        cutoff = BENCHMARK_CUTOFFS.get(type(gate), 32)
        initial = fock.vacuum(cutoff)

    def run(eta: float) -> dict:
        return _benchmark_cell(gate, replace(config, eta=eta), initial, samples, engine, period_tol)

    cells = _map(run, list(eta_grid), threads)
    traces = {f"eta={c['eta']}": c["trace"] for c in cells}
    best = max(cells, key=lambda c: c["final_fidelity"])
    final_metrics = {
        "per_eta": [
            {k: c[k] for k in (
                "eta", "gate_time_s", "periods", "steps_per_period",
                "frame_rate_rad_s", "final_fidelity", "max_leakage", "reliable",
            )}
            for c in cells
        ],
        "best_eta": best["eta"],
        "best_fidelity": best["final_fidelity"],
    }
    record = RunRecord(
        experiment="gate_benchmark",
        config={
            "gate": _gate_to_dict(gate),
            "ion": _ion_config_to_dict(config),
            "samples": samples,
            "eta_grid": list(eta_grid),
            "engine": engine,
            "cutoff": initial.layout[0],
            "period_tol": period_tol,
        },
        seeds=[],
        traces=traces,
        final_metrics=final_metrics,
        wall_time_s=time.time() - t0,
    )
    if with_wigner:
        record.final_metrics["wigner"] = {
            "achieved": analysis.wigner(best["final_state"]),
            "target": analysis.wigner(best["final_target"]),
        }
    return record


def _dataset(target_fn: Callable[[np.ndarray], np.ndarray], seed: int, n_train: int, n_test: int):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    xs_train = rng.uniform(-1.0, 1.0, n_train)
    xs_test = rng.uniform(-1.0, 1.0, n_test)
    return xs_train, target_fn(xs_train), xs_test, target_fn(xs_test)


TARGET_FUNCTIONS = {
    "sine": lambda x: np.sin(np.pi * x),
    "heaviside": lambda x: (np.asarray(x) >= 0).astype(float),
}


def _cell_seed(base_seed: int, *indices: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=tuple(indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0] & 0x7FFFFFFF)


def regression_experiment(
    target_fn: str = "sine",
    layer_counts: tuple[int, ...] = (1, 2, 3, 4, 6),
    n_seeds: int = 11,
    n_train: int = 50,
    n_test: int = 50,
    cutoff: int = 30,
    train_cfg: qnn.TrainConfig = qnn.TrainConfig(),
    base_seed: int = 2024,
    threads: int = 1,
    iters_per_layer: int | None = None,
) -> RunRecord:
    """Train one model per (layer count, initialization seed); record test MSE.

    With ``iters_per_layer`` set, each model's iteration budget is
    ``iters_per_layer * n_layers`` (deeper models have proportionally more
    parameters to optimize); otherwise ``train_cfg.max_iters`` applies to all.
    """
    t0 = time.time()
    fn = TARGET_FUNCTIONS[target_fn]
    xs_train, ys_train, xs_test, ys_test = _dataset(fn, base_seed, n_train, n_test)
    curve_xs = np.linspace(-1.0, 1.0, 101)
    zero = qnn.QnnLayerParams(0, 0, 0, 0, 0, 0, 0)

    def run(cell: tuple[int, int]) -> dict:
        n_layers, seed_idx = cell
        seed = _cell_seed(base_seed, 1, n_layers, seed_idx)
        model = qnn.QnnModel(tuple([zero] * n_layers), cutoff=cutoff)
        cfg = replace(train_cfg, seed=seed)
        if iters_per_layer is not None:
            cfg = replace(cfg, max_iters=iters_per_layer * n_layers)
        try:
            trained, history = qnn.train(
                model, None, cfg, regression=(xs_train, ys_train), randomize_init=True
            )
        except qnn.TrainingDivergedError as exc:
            return {"layers": n_layers, "seed": seed, "diverged_at": exc.iteration}
        preds = np.array([qnn.predict(trained, x) for x in xs_test])
        curve = np.array([qnn.predict(trained, x) for x in curve_xs])
        return {
            "layers": n_layers,
            "seed": seed,
            "train_mse": history[-1],
            "test_mse": qnn.mse_loss(preds, ys_test),
            "curve": curve,
            "model": trained,
        }

    cells = _map(run, [(nl, si) for nl in layer_counts for si in range(n_seeds)], threads)
    traces: dict = {}
    per_layer = {}
    for n_layers in layer_counts:
        group = [c for c in cells if c["layers"] == n_layers and "test_mse" in c]
        mses = np.array([c["test_mse"] for c in group])
        curves = np.stack([c["curve"] for c in group])
        per_layer[n_layers] = {
            "test_mse_per_seed": mses.tolist(),
            "mean_test_mse": float(mses.mean()),
            "std_test_mse": float(mses.std()),
            "diverged": sum(1 for c in cells if c["layers"] == n_layers and "diverged_at" in c),
        }
        traces[f"layers={n_layers}"] = [
            (float(x), float(m), float(s))
            for x, m, s in zip(curve_xs, curves.mean(axis=0), curves.std(axis=0))
        ]
    return RunRecord(
        experiment="regression",
        config={
            "target_fn": target_fn,
            "layer_counts": list(layer_counts),
            "n_seeds": n_seeds,
            "n_train": n_train,
            "n_test": n_test,
            "cutoff": cutoff,
            "train": _train_cfg_to_dict(train_cfg),
            "iters_per_layer": iters_per_layer,
            "base_seed": base_seed,
        },
        seeds=[c["seed"] for c in cells if "seed" in c],
        traces=traces,
        final_metrics={"per_layer": {str(k): v for k, v in per_layer.items()}},
        wall_time_s=time.time() - t0,
    )


def state_prep_experiment(
    target: TargetStateSpec | None = None,
    target_seeds: tuple[int, ...] | None = None,
    layer_counts: tuple[int, ...] = (1, 2, 3),
    n_inits: int = 30,
    cutoff: int = 20,
    train_cfg: qnn.TrainConfig = qnn.TrainConfig(max_iters=1500),
    base_seed: int = 77,
    threads: int = 1,
) -> RunRecord:
    """Variational preparation of quasi-random targets from the vacuum.

    Either a single `target` or an ensemble of `target_seeds` (one spec per
    seed); trains n_inits models per layer count per target and records the
    full fidelity distributions plus the best run's populations and Wigner
    grids.
    """
    t0 = time.time()
    if (target is None) == (target_seeds is None):
        raise ValueError("specify exactly one of target / target_seeds")
    if target is not None:
        specs = [target]
    else:
        specs = [random_target_state(s) for s in target_seeds]
    zero = qnn.QnnLayerParams(0, 0, 0, 0, 0, 0, 0)

    def run(cell: tuple[int, int, int]) -> dict:
        tgt_idx, n_layers, init_idx = cell
        tgt = specs[tgt_idx].as_state(cutoff)
        seed = _cell_seed(base_seed, tgt_idx, n_layers, init_idx)
        model = qnn.QnnModel(tuple([zero] * n_layers), cutoff=cutoff)
        cfg = replace(train_cfg, seed=seed)
        try:
            trained, history = qnn.train(
                model, None, cfg, state_prep_target=tgt, randomize_init=True
            )
        except qnn.TrainingDivergedError as exc:
            return {"target": tgt_idx, "layers": n_layers, "seed": seed,
                    "diverged_at": exc.iteration}
        prepared = qnn.forward(trained, fock.vacuum(cutoff))
        fid = analysis.fidelity(prepared, tgt)
        return {
            "target": tgt_idx, "layers": n_layers, "seed": seed,
            "fidelity": fid, "final_loss": history[-1],
            "model": trained, "prepared": prepared,
        }

    cells = _map(
        run,
        [(ti, nl, ii) for ti in range(len(specs)) for nl in layer_counts for ii in range(n_inits)],
        threads,
    )
    ok = [c for c in cells if "fidelity" in c]
    per_layer: dict = {}
    for n_layers in layer_counts:
        fids = [c["fidelity"] for c in ok if c["layers"] == n_layers]
        per_layer[str(n_layers)] = {
            "fidelities": fids,
            "max_fidelity": max(fids) if fids else 0.0,
            "mean_fidelity": float(np.mean(fids)) if fids else 0.0,
        }
    best = max(ok, key=lambda c: c["fidelity"])
    best_target = specs[best["target"]].as_state(cutoff)
    final_metrics = {
        "per_layer": per_layer,
        "best": {
            "layers": best["layers"],
            "seed": best["seed"],
            "fidelity": best["fidelity"],
            "checkpoint": _model_to_dict(best["model"]),
        },
        "populations": {
            "target": np.abs(best_target.amplitudes) ** 2,
            "prepared": np.abs(best["prepared"].amplitudes) ** 2,
        },
        "wigner": {
            "target": analysis.wigner(best_target),
            "prepared": analysis.wigner(best["prepared"]),
        },
    }
    traces = {
        f"layers={nl}": [(i, f) for i, f in enumerate(per_layer[str(nl)]["fidelities"])]
        for nl in layer_counts
    }
    return RunRecord(
        experiment="state_prep",
        config={
            "target_seeds": [s.seed for s in specs],
            "envelope_sigma": specs[0].envelope_sigma,
            "layer_counts": list(layer_counts),
            "n_inits": n_inits,
            "cutoff": cutoff,
            "train": _train_cfg_to_dict(train_cfg),
            "base_seed": base_seed,
        },
        seeds=[c["seed"] for c in cells if "seed" in c],
        traces=traces,
        final_metrics=final_metrics,
        wall_time_s=time.time() - t0,
    )


# --- serialization -----------------------------------------------------------


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _gate_to_dict(gate: ion.GateSpec) -> dict:
    d = {"kind": type(gate).__name__}
    for k, v in vars(gate).items():
        d[k] = [v.real, v.imag] if isinstance(v, complex) else v
    return d


def _ion_config_to_dict(config: ion.IonConfig) -> dict:
    return {
        "nu_rad_s": config.nu,
        "rabi0_rad_s": config.rabi0,
        "eta": config.eta,
        "nu_y_rad_s": config.nu_y,
        "eta_y": config.eta_y,
        "detuning_rad_s": config.detuning,
        "phase_rad": config.phase,
        "lamb_dicke_correction": config.lamb_dicke_correction,
    }


def _train_cfg_to_dict(cfg: qnn.TrainConfig) -> dict:
    return {
        "learning_rate": cfg.learning_rate,
        "beta1": cfg.beta1,
        "beta2": cfg.beta2,
        "epsilon": cfg.epsilon,
        "max_iters": cfg.max_iters,
        "fd_step": cfg.fd_step,
        "seed": cfg.seed,
    }


def _model_to_dict(model: qnn.QnnModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "convention": analysis.QUADRATURE_CONVENTION,
        "cutoff": model.cutoff,
        "layers": [
            {name: getattr(layer, name) for name in qnn.LAYER_PARAM_NAMES}
            for layer in model.layers
        ],
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, analysis.WignerGrid):
        return {
            "x_axis": obj.x_axis.tolist(),
            "p_axis": obj.p_axis.tolist(),
            "min_value": obj.min_value(),
        }
    return obj


def save_run_record(record: RunRecord, out_dir) -> Path:
    """Write record.json, trace.csv, and any Wigner / population side files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = _jsonable(record.to_json_dict())
    (out / "record.json").write_text(json.dumps(payload, indent=1))

    with (out / "trace.csv").open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["schema_version", SCHEMA_VERSION])
        if record.experiment == "gate_benchmark":
            writer.writerow(["eta", "time_s", "parameter_scale", "fidelity"])
            for key, rows in record.traces.items():
                eta = key.split("=")[1]
                for t, s, fid in rows:
                    writer.writerow([eta, repr(float(t)), repr(float(s)), repr(float(fid))])
        elif record.experiment == "regression":
            writer.writerow(["layers", "x", "mean_prediction", "std_prediction"])
            for key, rows in record.traces.items():
                nl = key.split("=")[1]
                for x, m, s in rows:
                    writer.writerow([nl, repr(float(x)), repr(float(m)), repr(float(s))])
        else:
            writer.writerow(["layers", "run_index", "fidelity"])
            for key, rows in record.traces.items():
                nl = key.split("=")[1]
                for i, fid in rows:
                    writer.writerow([nl, i, repr(float(fid))])

    wig = record.final_metrics.get("wigner")
    if wig:
        for name, grid in wig.items():
            if isinstance(grid, analysis.WignerGrid):
                analysis.wigner_to_csv(grid, out / f"wigner_{name}.csv")
    pops = record.final_metrics.get("populations")
    if pops is not None:
        with (out / "populations.csv").open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["fock_index", "target_prob", "prepared_prob"])
            for i, (pt, pp) in enumerate(zip(pops["target"], pops["prepared"])):
                writer.writerow([i, repr(float(pt)), repr(float(pp))])
    return out
