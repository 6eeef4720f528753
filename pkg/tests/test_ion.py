import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvion import fock, gates, ion
from cvion.evolve import propagate_const

NU = 2 * math.pi * 3e6
OMEGA0 = 2 * math.pi * 1e5


def one_mode(eta=0.05, **kw):
    return ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=eta, **kw)


def two_mode(eta=0.05, eta_y=0.04, **kw):
    return ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=eta, nu_y=2 * math.pi * 2e6, eta_y=eta_y, **kw)


class TestIonConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ion.IonConfig(nu=-1.0, rabi0=OMEGA0, eta=0.05)
        with pytest.raises(ValueError):
            ion.IonConfig(nu=NU, rabi0=0.0, eta=0.05)
        with pytest.raises(ValueError):
            ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=1.5)
        with pytest.raises(ValueError):
            ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.05, nu_y=NU)  # missing eta_y

    def test_large_eta_warns(self):
        with pytest.warns(UserWarning, match="Lamb-Dicke"):
            ion.IonConfig(nu=NU, rabi0=OMEGA0, eta=0.4)

    def test_corrected_rabi(self):
        assert ion.corrected_rabi(OMEGA0, 0.0) == OMEGA0
        assert math.isclose(ion.corrected_rabi(OMEGA0, 0.3), OMEGA0 * math.exp(-0.09))
        grid = np.linspace(0.0, 0.5, 20)
        vals = [ion.corrected_rabi(OMEGA0, e) for e in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_rabi_property_uses_flag(self):
        cfg = one_mode(eta=0.1)
        assert cfg.rabi == OMEGA0
        cfg = one_mode(eta=0.1, lamb_dicke_correction=True)
        assert math.isclose(cfg.rabi, OMEGA0 * math.exp(-0.01))


class TestFullHamiltonian:
    def test_small_eta_carrier_limit(self):
        cfg = one_mode(eta=1e-8)
        drive = ion.DriveSpec((ion.Tone(0.0, 0.0),))
        h = ion.full_hamiltonian(0.0, cfg, drive, (6,))
        expected = (OMEGA0 / 2.0) * np.kron(fock.pauli("x").entries, np.eye(6))
        assert np.allclose(h.entries, expected, atol=OMEGA0 * 1e-7)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 1e-5), st.floats(0.01, 0.25), st.floats(-math.pi, math.pi))
    def test_hermitian(self, t, eta, phase):
        cfg = one_mode(eta=eta)
        drive = ion.DriveSpec((ion.Tone(NU, phase), ion.Tone(-NU, -phase)))
        h = ion.full_hamiltonian(t, cfg, drive, (8,)).entries
        assert float(np.abs(h - h.conj().T).max()) < 1e-12 * max(1.0, np.abs(h).max())

    def test_first_sideband_expansion(self):
        # e^{i gamma(0)} = 1 + i eta (a + a^dag) + O(eta^2)
        eta = 0.05
        cfg = one_mode(eta=eta)
        drive = ion.DriveSpec((ion.Tone(NU, 0.0),))
        h = ion.full_hamiltonian(0.0, cfg, drive, (10,)).entries
        a = fock.ladder(10, "annihilate").entries
        sp = fock.pauli("+").entries
        m = (OMEGA0 / 2.0) * (np.eye(10) + 1j * eta * (a + a.conj().T))
        approx = np.kron(sp, m)
        approx = approx + approx.conj().T
        scale = OMEGA0 / 2.0
        assert float(np.abs(h - approx).max()) < 10 * eta**2 * scale

    def test_two_mode_gamma(self):
        cfg = two_mode()
        g = ion.gamma_operator(0.0, cfg, (4, 5))
        ax = np.kron(fock.ladder(4, "annihilate").entries, np.eye(5))
        by = np.kron(np.eye(4), fock.ladder(5, "annihilate").entries)
        expected = cfg.eta * (ax + ax.conj().T) + cfg.eta_y * (by + by.conj().T)
        assert np.allclose(g.entries, expected, atol=1e-14)


class TestEffectiveHamiltonian:
    def test_carrier_commutes_with_number(self):
        cfg = one_mode()
        h = ion.effective_hamiltonian(ion.Phase(0.5), cfg, (12,)).entries
        sx_n = np.kron(fock.pauli("x").entries, fock.ladder(12, "number").entries)
        assert float(np.abs(h @ sx_n - sx_n @ h).max()) < 1e-9

    def test_trisqueeze_sparsity(self):
        cfg = one_mode()
        h = ion.effective_hamiltonian(ion.Trisqueeze(0.2, 0.3), cfg, (10,)).entries
        block = h[10:, :10]  # spin off-diagonal block carries the mode operator
        for m in range(10):
            for n in range(10):
                if abs(m - n) != 3:
                    assert abs(block[m, n]) < 1e-12

    def test_two_mode_gate_needs_two_mode_config(self):
        with pytest.raises(fock.LayoutMismatchError):
            ion.effective_hamiltonian(ion.BeamSplitter(0.5), one_mode(), (6, 6))


# the binding contract: effective-H evolution on |+> equals the ideal gate
GATE_CASES = [
    (ion.Phase(0.7), "one", (24,), lambda: fock.coherent(1.0, 24)),
    (ion.Phase(-1.3), "one", (24,), lambda: fock.coherent(1.0, 24)),
    (ion.Displace(3.0), "one", (40,), lambda: fock.vacuum(40)),
    (ion.Displace(-0.7 + 1.2j), "one", (24,), lambda: fock.vacuum(24)),
    (ion.Squeeze(1.4, 0.0), "one", (60,), lambda: fock.coherent(1.0, 60)),
    (ion.Squeeze(0.5, 2.1), "one", (30,), lambda: fock.vacuum(30)),
    (ion.Trisqueeze(0.32, 0.0), "one", (32,), lambda: fock.vacuum(32)),
    (ion.Trisqueeze(0.2, -0.9), "one", (32,), lambda: fock.vacuum(32)),
    (ion.Kerr(math.pi), "one", (32,), lambda: fock.coherent(1.5, 32)),
    (ion.Kerr(-0.8), "one", (24,), lambda: fock.coherent(1.0, 24)),
    (ion.BeamSplitter(math.pi / 2, 0.0), "two", (6, 6),
     lambda: fock.tensor(fock.fock_state(1, 6), fock.vacuum(6))),
    (ion.BeamSplitter(-0.8, 0.4), "two", (8, 8),
     lambda: fock.tensor(fock.coherent(0.7, 8), fock.vacuum(8))),
    (ion.TwoModeSqueeze(0.5, 0.0), "two", (14, 14),
     lambda: fock.tensor(fock.vacuum(14), fock.vacuum(14))),
    (ion.TwoModeSqueeze(0.3, 1.1), "two", (10, 10),
     lambda: fock.tensor(fock.vacuum(10), fock.vacuum(10))),
]


@pytest.mark.parametrize("gate,kind,cutoffs,make_init", GATE_CASES)
def test_effective_evolution_equals_ideal_gate(gate, kind, cutoffs, make_init):
    cfg = one_mode() if kind == "one" else two_mode()
    init = make_init()
    t_gate, drive = ion.gate_time_and_drive(gate, cfg)
    assert t_gate >= 0 and math.isfinite(t_gate)
    assert 1 <= len(drive.tones) <= 2
    h_eff = ion.effective_hamiltonian(gate, cfg, cutoffs)
    full = propagate_const(h_eff, t_gate, fock.tensor(fock.spin_plus_state(), init))
    amps = full.amplitudes.reshape(2, init.dim)
    reduced = (amps[0] + amps[1]) / math.sqrt(2.0)
    target = gates.ideal_unitary(gate, cutoffs) @ init
    fid = abs(np.vdot(reduced, target.amplitudes)) ** 2
    assert fid >= 1.0 - 1e-9


class TestGateTimeAndDrive:
    def test_zero_phase_gate(self):
        t, _ = ion.gate_time_and_drive(ion.Phase(0.0), one_mode())
        assert t == 0.0

    def test_displacement_time_formula(self):
        cfg = one_mode(eta=0.1, lamb_dicke_correction=True)
        t, _ = ion.gate_time_and_drive(ion.Displace(3.0), cfg)
        assert math.isclose(t, 2.0 * 3.0 / (cfg.rabi * 0.1))

    def test_displacement_tones_at_first_sidebands(self):
        _, drive = ion.gate_time_and_drive(ion.Displace(1.0), one_mode())
        assert sorted(tone.detuning for tone in drive.tones) == [-NU, NU]

    def test_trisqueeze_tones_at_third_sidebands(self):
        _, drive = ion.gate_time_and_drive(ion.Trisqueeze(0.1), one_mode())
        assert sorted(tone.detuning for tone in drive.tones) == [-3 * NU, 3 * NU]

    def test_carrier_is_single_tone(self):
        _, drive = ion.gate_time_and_drive(ion.Kerr(1.0), one_mode())
        assert len(drive.tones) == 1 and drive.tones[0].detuning == 0.0

    def test_bs_tms_tone_frequencies(self):
        cfg = two_mode()
        _, bs = ion.gate_time_and_drive(ion.BeamSplitter(0.5), cfg)
        assert sorted(t.detuning for t in bs.tones) == [-(NU - cfg.nu_y), NU - cfg.nu_y]
        _, tms = ion.gate_time_and_drive(ion.TwoModeSqueeze(0.5), cfg)
        assert sorted(t.detuning for t in tms.tones) == [-(NU + cfg.nu_y), NU + cfg.nu_y]


def test_carrier_frame_rotation_rate_value():
    cfg = one_mode(eta=0.1, lamb_dicke_correction=True)
    expected = (cfg.rabi / 2.0) * (0.01 - 0.0001 / 2.0)
    assert math.isclose(ion.carrier_frame_rotation_rate(cfg), expected)
