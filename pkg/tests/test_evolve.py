import math

import numpy as np
import pytest

from cvion import evolve, fock, ion

NU = 2 * math.pi * 3e6
OMEGA0 = 2 * math.pi * 1e5


def random_hermitian(dim, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return fock.DenseOperator((m + m.conj().T) / 2.0, (dim,))


def random_state(dim, seed):
    rng = np.random.default_rng(seed)
    return fock.FockVector(rng.normal(size=dim) + 1j * rng.normal(size=dim), (dim,))


class TestPropagateConst:
    def test_zero_time(self):
        h = random_hermitian(8, 0)
        psi = random_state(8, 1)
        assert evolve.propagate_const(h, 0.0, psi) is psi

    def test_diagonal_phase(self):
        h = fock.ladder(2, "number")
        psi = fock.FockVector(np.array([1.0, 1.0]) / math.sqrt(2), (2,))
        out = evolve.propagate_const(h, math.pi, psi)
        target = np.array([1.0, -1.0]) / math.sqrt(2)
        assert abs(abs(np.vdot(out.amplitudes, target)) - 1.0) < 1e-12

    def test_taylor_oracle(self):
        # freeze against a brute-force truncated series with machine-precision tail
        h = random_hermitian(16, 7)
        psi = random_state(16, 8)
        t = 0.6
        acc = psi.amplitudes.copy()
        term = psi.amplitudes.copy()
        for k in range(1, 80):
            term = (-1j * t / k) * (h.entries @ term)
            acc += term
        out = evolve.propagate_const(h, t, psi)
        assert float(np.abs(out.amplitudes - acc).max()) < 1e-9

    def test_rejects_non_hermitian(self):
        m = fock.DenseOperator(np.array([[0.0, 1.0], [0.0, 0.0]]), (2,))
        with pytest.raises(evolve.NonHermitianError):
            evolve.propagate_const(m, 1.0, random_state(2, 0))

    def test_composition(self):
        h = random_hermitian(10, 3)
        psi = random_state(10, 4)
        once = evolve.propagate_const(h, 0.9, psi)
        twice = evolve.propagate_const(h, 0.5, evolve.propagate_const(h, 0.4, psi))
        assert float(np.abs(once.amplitudes - twice.amplitudes).max()) < 1e-9

    def test_norm_preserved(self):
        out = evolve.propagate_const(random_hermitian(12, 5), 2.3, random_state(12, 6))
        assert abs(out.norm() - 1.0) < 1e-10


def rabi_hamiltonian(omega, delta):
    sp = fock.pauli("+").entries

    def h(t):
        m = (omega / 2.0) * np.exp(-1j * delta * t) * sp
        return fock.DenseOperator(m + m.conj().T, (2,))

    return h


class TestPropagateTdep:
    def test_constant_matches_const(self):
        h = random_hermitian(8, 11)
        psi = random_state(8, 12)
        report = evolve.propagate_tdep(lambda t: h, (0.0, 1.2), psi)
        direct = evolve.propagate_const(h, 1.2, psi)
        assert abs(abs(np.vdot(report.final_state.amplitudes, direct.amplitudes)) - 1) < 1e-10
        assert report.norm_drift < 1e-8

    def test_rabi_formula(self):
        # detuned two-level drive: P_e = (W^2_R/W^2) sin^2(W t / 2), W = sqrt(Omega^2 + delta^2)
        omega, delta = OMEGA0, 0.4 * OMEGA0
        t_final = 3.0 / omega
        psi = fock.fock_state(0, 2)
        report = evolve.propagate_tdep(
            rabi_hamiltonian(omega, delta), (0.0, t_final), psi,
            evolve.StepControl(initial_steps=256, tolerance=1e-12),
        )
        w = math.hypot(omega, delta)
        expected = (omega**2 / w**2) * math.sin(w * t_final / 2.0) ** 2
        p_e = abs(report.final_state.amplitudes[1]) ** 2
        assert abs(p_e - expected) < 1e-6

    def test_self_convergence(self):
        h = rabi_hamiltonian(OMEGA0, 0.2 * OMEGA0)
        psi = fock.fock_state(0, 2)
        r1 = evolve.propagate_tdep(h, (0.0, 2.0 / OMEGA0), psi)
        r2 = evolve.propagate_tdep(
            h, (0.0, 2.0 / OMEGA0), psi, evolve.StepControl(initial_steps=128)
        )
        fid = abs(np.vdot(r1.final_state.amplitudes, r2.final_state.amplitudes)) ** 2
        assert 1.0 - fid < 1e-9

    def test_second_order_convergence(self):
        # halving the step should cut the end-state error by roughly 4x
        h = rabi_hamiltonian(OMEGA0, 0.5 * OMEGA0)
        psi = fock.fock_state(0, 2)
        t_final = 4.0 / OMEGA0
        exact, _ = evolve._midpoint_sweep(h, 0.0, t_final, 1 << 14, psi, track_leakage=False)
        errs = []
        for steps in (64, 128, 256):
            approx, _ = evolve._midpoint_sweep(h, 0.0, t_final, steps, psi, track_leakage=False)
            errs.append(float(np.abs(approx.amplitudes - exact.amplitudes).max()))
        assert errs[0] / errs[1] > 3.5
        assert errs[1] / errs[2] > 3.5


class TestPeriodicDrivePropagator:
    def test_matches_generic_midpoint(self):
        cfg = ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.08)
        _, drive = ion.gate_time_and_drive(ion.Squeeze(0.5), cfg)
        prop = evolve.PeriodicDrivePropagator(cfg, drive, (10,))
        u_fast = prop.period_propagator(256)
        dt = prop.period / 256
        u_ref = np.eye(prop.dim, dtype=complex)
        for k in range(256):
            h = prop.hamiltonian((k + 0.5) * dt).entries
            w, v = np.linalg.eigh(h)
            u_ref = v @ (np.exp(-1j * w * dt)[:, None] * (v.conj().T @ u_ref))
        assert float(np.abs(u_fast - u_ref).max()) < 1e-12

    def test_hamiltonian_matches_full(self):
        cfg = ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.08)
        _, drive = ion.gate_time_and_drive(ion.Displace(1.0), cfg)
        prop = evolve.PeriodicDrivePropagator(cfg, drive, (8,))
        for t in (0.0, 1.3e-7, 4.7e-7):
            direct = ion.full_hamiltonian(t, cfg, drive, (8,)).entries
            assert float(np.abs(prop.hamiltonian(t).entries - direct).max()) < 1e-9 * OMEGA0

    def test_period_propagator_unitary(self):
        cfg = ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.05)
        _, drive = ion.gate_time_and_drive(ion.Kerr(1.0), cfg)
        prop = evolve.PeriodicDrivePropagator(cfg, drive, (12,))
        u = prop.period_propagator(128)
        assert float(np.abs(u @ u.conj().T - np.eye(prop.dim)).max()) < 1e-10

    def test_incommensurate_drive_rejected(self):
        cfg = ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.05)
        drive = ion.DriveSpec((ion.Tone(0.37 * NU, 0.0),))
        with pytest.raises(ValueError):
            evolve.PeriodicDrivePropagator(cfg, drive, (8,))


def test_matrix_power_unitary():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    q, _ = np.linalg.qr(m)
    assert np.allclose(evolve.matrix_power_unitary(q, 0), np.eye(6))
    for k in (1, 2, 7, 19):
        assert np.allclose(evolve.matrix_power_unitary(q, k), np.linalg.matrix_power(q, k))


def test_mode_leakage_skips_spin():
    amps = np.zeros(2 * 10)
    amps[0] = 1.0
    assert evolve.mode_leakage(amps, (2, 10)) == 0.0
    amps = np.zeros(2 * 10)
    amps[19] = 1.0  # |e, 9>
    assert evolve.mode_leakage(amps, (2, 10)) == 1.0
