import json
import math

import numpy as np
import pytest

from cvion import experiments, fock, ion, qnn

NU = 2 * math.pi * 3e6
OMEGA0 = 2 * math.pi * 1e5


def base_config(**kw):
    return ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.05, **kw)


class TestRandomTargetState:
    def test_unit_norm(self):
        spec = experiments.random_target_state(3)
        assert abs(np.linalg.norm(spec.amplitudes) - 1.0) < 1e-12

    def test_deterministic(self):
        a = experiments.random_target_state(42)
        b = experiments.random_target_state(42)
        assert np.array_equal(a.amplitudes, b.amplitudes)

    def test_envelope_concentrates_low_fock(self):
        hits = 0
        for seed in range(100):
            c = experiments.random_target_state(seed).amplitudes
            if np.sum(np.abs(c[:10]) ** 2) > np.sum(np.abs(c[10:]) ** 2):
                hits += 1
        assert hits >= 95

    def test_padding(self):
        spec = experiments.random_target_state(0)
        st = spec.as_state(30)
        assert st.layout == (30,)
        assert np.allclose(st.amplitudes[20:], 0.0)


class TestGateBenchmark:
    def test_effective_engine_self_consistency(self):
        # the effective engine must match the ideal gate at every sample
        for gate in (ion.Displace(1.5), ion.Squeeze(0.6), ion.Kerr(1.0)):
            rec = experiments.gate_benchmark(
                gate, base_config(), initial=fock.coherent(0.8, 24),
                samples=6, eta_grid=(0.05,), engine="effective", with_wigner=False,
            )
            for _, _, fid in rec.traces["eta=0.05"]:
                assert fid >= 1.0 - 1e-9

    def test_full_engine_short_gate(self):
        rec = experiments.gate_benchmark(
            ion.Displace(1.0), base_config(), initial=fock.vacuum(24),
            samples=4, eta_grid=(0.1,), with_wigner=False,
        )
        cell = rec.final_metrics["per_eta"][0]
        assert cell["final_fidelity"] > 0.995
        assert cell["reliable"]
        assert cell["max_leakage"] < 1e-3

    def test_fidelity_trace_monotone_parameter(self):
        rec = experiments.gate_benchmark(
            ion.Displace(1.0), base_config(), initial=fock.vacuum(24),
            samples=5, eta_grid=(0.1,), with_wigner=False,
        )
        scales = [s for _, s, _ in rec.traces["eta=0.1"]]
        assert scales == sorted(scales)
        assert abs(scales[-1] - 1.0) < 1e-9

    def test_record_reproducible(self):
        kw = dict(initial=fock.vacuum(20), samples=3, eta_grid=(0.1,), with_wigner=False)
        r1 = experiments.gate_benchmark(ion.Displace(0.5), base_config(), **kw)
        r2 = experiments.gate_benchmark(ion.Displace(0.5), base_config(), **kw)
        assert r1.traces == r2.traces
        assert r1.final_metrics == r2.final_metrics


class TestScaledGate:
    @pytest.mark.parametrize("gate,attr", [
        (ion.Displace(2.0), "alpha"),
        (ion.Squeeze(1.0, 0.3), "r"),
        (ion.Kerr(2.0), "tau"),
        (ion.Phase(1.0), "theta"),
        (ion.Trisqueeze(0.4, 0.1), "r"),
    ])
    def test_linear_scaling(self, gate, attr):
        scaled = experiments._scaled_gate(gate, 0.25)
        assert getattr(scaled, attr) == pytest.approx(0.25 * getattr(gate, attr))


class TestSeeding:
    def test_cell_seed_deterministic_and_distinct(self):
        s1 = experiments._cell_seed(7, 1, 2, 3)
        s2 = experiments._cell_seed(7, 1, 2, 3)
        s3 = experiments._cell_seed(7, 1, 2, 4)
        assert s1 == s2
        assert s1 != s3


class TestRunRecordSerialization:
    def test_save_files(self, tmp_path):
        rec = experiments.gate_benchmark(
            ion.Displace(0.5), base_config(), initial=fock.vacuum(16),
            samples=3, eta_grid=(0.1,), with_wigner=True,
        )
        out = experiments.save_run_record(rec, tmp_path / "run")
        data = json.loads((out / "record.json").read_text())
        assert data["schema_version"] == experiments.SCHEMA_VERSION
        assert data["experiment"] == "gate_benchmark"
        assert (out / "trace.csv").exists()
        assert (out / "wigner_achieved.csv").exists()
        assert (out / "wigner_target.csv").exists()

    def test_record_json_identical_across_runs(self, tmp_path):
        kw = dict(initial=fock.vacuum(16), samples=3, eta_grid=(0.1,), with_wigner=False)
        for name in ("a", "b"):
            rec = experiments.gate_benchmark(ion.Displace(0.5), base_config(), **kw)
            experiments.save_run_record(rec, tmp_path / name)
        da = json.loads((tmp_path / "a" / "record.json").read_text())
        db = json.loads((tmp_path / "b" / "record.json").read_text())
        da.pop("wall_time_s")
        db.pop("wall_time_s")
        assert da == db


class TestSmallTrainingExperiments:
    def test_regression_smoke(self):
        rec = experiments.regression_experiment(
            target_fn="sine", layer_counts=(1,), n_seeds=2, n_train=10, n_test=10,
            cutoff=16, train_cfg=qnn.TrainConfig(max_iters=30), base_seed=5,
        )
        stats = rec.final_metrics["per_layer"]["1"]
        assert len(stats["test_mse_per_seed"]) == 2
        assert stats["mean_test_mse"] >= 0.0

    def test_state_prep_smoke(self, tmp_path):
        rec = experiments.state_prep_experiment(
            target=experiments.random_target_state(1), layer_counts=(1,),
            n_inits=2, train_cfg=qnn.TrainConfig(max_iters=30), base_seed=6,
        )
        assert len(rec.final_metrics["per_layer"]["1"]["fidelities"]) == 2
        out = experiments.save_run_record(rec, tmp_path / "prep")
        assert (out / "populations.csv").exists()
        assert (out / "wigner_target.csv").exists()

    def test_training_experiment_determinism(self):
        kw = dict(target_fn="sine", layer_counts=(1,), n_seeds=1, n_train=8, n_test=8,
                  cutoff=12, train_cfg=qnn.TrainConfig(max_iters=10), base_seed=9)
        r1 = experiments.regression_experiment(**kw)
        r2 = experiments.regression_experiment(**kw)
        assert r1.final_metrics == r2.final_metrics
