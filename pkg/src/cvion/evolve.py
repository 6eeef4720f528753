"""Time-evolution engines.

``propagate_const`` handles time-independent Hermitian Hamiltonians through
an exact eigendecomposition.  ``propagate_tdep`` integrates time-dependent
Hamiltonians with a piecewise-constant midpoint scheme (exact exponential on
every substep, so unconditionally norm-preserving), refining the global step
until the end state converges in fidelity.

``PeriodicDrivePropagator`` exploits the exact time-periodicity of the
sideband-driven ion Hamiltonian: the one-period propagator is computed once
with the same midpoint scheme and then powered, which is what makes the
millions-of-trap-periods gate benchmarks tractable.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fock import DenseOperator, FockVector, LayoutMismatchError
from .ion import DriveSpec, IonConfig, _mode_cutoffs
from . import ion as _ion

HERMITIAN_REJECT_TOL = 1e-9


class NonHermitianError(ValueError):
    """Raised when a propagator is handed a non-Hermitian Hamiltonian."""


class ConvergenceError(RuntimeError):
    """Integrator failed to converge; carries the last two end-state fidelities."""

    def __init__(self, fidelities: tuple[float, float], rounds: int):
        self.fidelities = fidelities
        self.rounds = rounds
        super().__init__(
            f"no convergence after {rounds} refinement rounds; "
            f"last fidelities {fidelities[0]:.12f}, {fidelities[1]:.12f}"
        )


@dataclass(frozen=True)
class StepControl:
    initial_steps: int = 64
    tolerance: float = 1e-9
    max_rounds: int = 20


@dataclass(frozen=True)
class EvolutionReport:
    final_state: FockVector
    norm_drift: float
    steps_used: int
    max_leakage: float


def _check_hermitian(h: DenseOperator):
    dev = float(np.abs(h.entries - h.entries.conj().T).max())
    scale = max(1.0, float(np.abs(h.entries).max()))
    if dev > HERMITIAN_REJECT_TOL * scale:
        raise NonHermitianError(f"max |H - H^dag| = {dev:.3e} exceeds tolerance")


def propagate_const(h: DenseOperator, t: float, psi: FockVector) -> FockVector:
    """exp(-i H t)|psi> via eigendecomposition of the Hermitian H."""
    if h.layout != psi.layout:
        raise LayoutMismatchError(f"{h.layout} vs {psi.layout}")
    _check_hermitian(h)
    if t == 0.0:
        return psi
    w, v = np.linalg.eigh(h.entries)
    out = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi.amplitudes))
    return FockVector(out, psi.layout)


def mode_leakage(amplitudes: np.ndarray, layout, top_fraction: float = 0.1) -> float:
    """Max over bosonic modes of the population in the top ceil(fraction*N) levels.

    The spin subsystem (dimension 2, leading position) is excluded.
    """
    probs = np.abs(np.asarray(amplitudes)) ** 2
    probs = probs.reshape(layout)
    worst = 0.0
    for axis, dim in enumerate(layout):
        if axis == 0 and dim == 2 and len(layout) > 1:
            continue
        k = max(1, math.ceil(top_fraction * dim))
        marg = probs.sum(axis=tuple(i for i in range(len(layout)) if i != axis))
        worst = max(worst, float(marg[dim - k:].sum()))
    return worst


def _midpoint_sweep(
    h: Callable[[float], DenseOperator],
    t0: float,
    t1: float,
    steps: int,
    psi: FockVector,
    track_leakage: bool = True,
) -> tuple[FockVector, float]:
    dt = (t1 - t0) / steps
    amps = psi.amplitudes
    layout = psi.layout
    leak = mode_leakage(amps, layout) if track_leakage else 0.0
    for k in range(steps):
        hk = h(t0 + (k + 0.5) * dt)
        if hk.layout != layout:
            raise LayoutMismatchError(f"{hk.layout} vs {layout}")
        _check_hermitian(hk)
        w, v = np.linalg.eigh(hk.entries)
        amps = v @ (np.exp(-1j * w * dt) * (v.conj().T @ amps))
        if track_leakage:
            leak = max(leak, mode_leakage(amps, layout))
    return FockVector(amps, layout), leak


def propagate_tdep(
    h: Callable[[float], DenseOperator],
    t_span: tuple[float, float],
    psi: FockVector,
    ctrl: StepControl = StepControl(),
) -> EvolutionReport:
    """Midpoint piecewise-constant integration with global step refinement.

    The step count is doubled until the fidelity between successive end
    states exceeds 1 - ctrl.tolerance.
    """
    t0, t1 = t_span
    if t1 <= t0:
        raise ValueError(f"need t1 > t0, got {t_span}")
    steps = max(1, int(ctrl.initial_steps))
    prev, leak = _midpoint_sweep(h, t0, t1, steps, psi)
    last_two = (0.0, 0.0)
    for _ in range(ctrl.max_rounds):
        steps *= 2
        cur, leak = _midpoint_sweep(h, t0, t1, steps, psi)
        fid = abs(np.vdot(prev.amplitudes, cur.amplitudes)) ** 2
        last_two = (last_two[1], fid)
        if 1.0 - fid < ctrl.tolerance:
            norm_drift = abs(float(np.linalg.norm(cur.amplitudes)) - 1.0)
            return EvolutionReport(cur, norm_drift, steps, leak)
        prev = cur
    raise ConvergenceError(last_two, ctrl.max_rounds)


# --- periodic-drive engine ---------------------------------------------------


def _drive_period(config: IonConfig, drive: DriveSpec) -> float:
    """Common period of gamma(t) and all tone factors, or raise if incommensurate.

    gamma has period 2 pi / nu (and 2 pi / nu_y); tone detunings must be
    integer multiples of the fundamental.
    """
    base = config.nu
    rates = [config.nu] + ([config.nu_y] if config.nu_y is not None else [])
    rates += [abs(t.detuning) for t in drive.tones if t.detuning != 0.0]
    for r in rates:
        ratio = r / base
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"drive rate {r} not an integer multiple of nu={base}")
    return 2.0 * math.pi / base


class PeriodicDrivePropagator:
    """Midpoint propagator for the full ion Hamiltonian under a periodic drive.

    Precomputes exp(i gamma(0)) once; at each substep gamma(t) is obtained by
    the exact rotation e^{i gamma(t)} = R(t) e^{i gamma(0)} R(t)^dag with
    R(t) = diag phases of the mode number operators, avoiding a matrix
    exponential per substep.  Because every tone multiplies the same unitary
    e^{i gamma(t)}, the coupling block is (scalar) x (unitary) and
    H(t)^2 = |c(t)|^2 I exactly, giving a closed-form substep propagator.
    """

    def __init__(self, config: IonConfig, drive: DriveSpec, cutoffs):
        self.config = config
        self.drive = drive
        self.cutoffs = _mode_cutoffs(cutoffs)
        self.period = _drive_period(config, drive)
        self.mode_dim = int(np.prod(self.cutoffs))
        self.dim = 2 * self.mode_dim
        gam0 = _ion.gamma_operator(0.0, config, self.cutoffs)
        w, v = np.linalg.eigh(gam0.entries)
        self._e_igamma0 = (v * np.exp(1j * w)) @ v.conj().T
        # rotation phases: nu * n summed over modes
        if len(self.cutoffs) == 1:
            rates = config.nu * np.arange(self.cutoffs[0])
        else:
            nx = np.arange(self.cutoffs[0])
            ny = np.arange(self.cutoffs[1])
            rates = (config.nu * nx[:, None] + config.nu_y * ny[None, :]).ravel()
        self._rot_rates = rates

    def _envelope(self, t: float) -> complex:
        """Scalar tone sum c(t) = sum_tones (w Omega/2) e^{-i(delta t - phi)}."""
        omega = self.config.rabi
        return sum(
            (tone.weight * omega / 2.0) * cmath.exp(-1j * (tone.detuning * t - tone.phase))
            for tone in self.drive.tones
        )

    def _unitary_part(self, t: float) -> np.ndarray:
        """e^{i gamma(t)} from the cached t=0 exponential and exact rotation phases."""
        ph = np.exp(1j * self._rot_rates * t)
        return (ph[:, None] * self._e_igamma0) * ph.conj()[None, :]

    def _coupling(self, t: float) -> np.ndarray:
        """Upper-left spin block c(t) e^{i gamma(t)}."""
        return self._envelope(t) * self._unitary_part(t)

    def hamiltonian(self, t: float) -> DenseOperator:
        m = self._coupling(t)
        h = np.zeros((self.dim, self.dim), dtype=np.complex128)
        h[self.mode_dim:, : self.mode_dim] = m        # sigma_+ block (|e><g|)
        h[: self.mode_dim, self.mode_dim:] = m.conj().T
        return DenseOperator(h, (2,) + self.cutoffs)

    def period_propagator(self, steps: int, t0: float = 0.0, t1: float | None = None) -> np.ndarray:
        """Midpoint propagator over [t0, t1] (default one full period)."""
        if t1 is None:
            t1 = t0 + self.period
        dt = (t1 - t0) / steps
        u = np.eye(self.dim, dtype=np.complex128)
        nd = self.mode_dim
        # The coupling block is c(t) e^{i gamma(t)}, a scalar times a unitary,
        # so H(t)^2 = |c(t)|^2 I exactly and each substep is closed-form.
        for k in range(steps):
            tm = t0 + (k + 0.5) * dt
            c = self._envelope(tm)
            m = c * self._unitary_part(tm)
            r = abs(c)
            cos_f = math.cos(r * dt)
            sin_f = (-1j * math.sin(r * dt) / r) if r > 0.0 else -1j * dt
            top = cos_f * u[:nd] + sin_f * (m.conj().T @ u[nd:])
            bot = cos_f * u[nd:] + sin_f * (m @ u[:nd])
            u = np.concatenate([top, bot], axis=0)
        return u


def matrix_power_unitary(u: np.ndarray, k: int) -> np.ndarray:
    """u^k by binary powering (k >= 0)."""
    result = np.eye(u.shape[0], dtype=np.complex128)
    base = u
    while k > 0:
        if k & 1:
            result = base @ result
        base = base @ base
        k >>= 1
    return result
